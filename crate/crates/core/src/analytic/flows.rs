//! Network-wide arrival rates: fresh fog traffic, offloads hop by hop, cloud
//! spill, and the acceptance probabilities that make them consistent.

use rayon::prelude::*;

use super::acceptance::acceptance_prob;
use super::chain::{mean_wait, solve_chain_with, ChainOptions, SteadyState};
use super::cloud::{cloud_load, CloudLoad};
use crate::error::{Error, Result};
use crate::model::{NodeId, PolicyMode, RequestType};
use crate::topology::Topology;

/// Number of trailing residuals kept for convergence reports.
const TRAJECTORY_LEN: usize = 20;
/// Consecutive same-sign excesses after which a node's far bracket end is
/// treated as stale and widened.
const STALE_STEPS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Stop when no acceptance probability moves by more than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping weight of the new iterate.
    pub omega: f64,
    /// Truncation tolerance of each fog chain.
    pub chain_tol: f64,
    /// Safeguarded secant update per node instead of plain damping.
    pub accelerate: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            omega: 0.5,
            chain_tol: 1e-8,
            accelerate: true,
        }
    }
}

/// Rates at one fog node, each indexed by request type.
#[derive(Debug, Clone, PartialEq)]
pub struct FogFlow {
    pub id: usize,
    /// Accepted arrival rate.
    pub lambda: [f64; 2],
    pub accept_prob: f64,
    /// Mean backlog seen by an arrival (ms).
    pub mean_wait: f64,
    /// Mean time from acceptance to end of processing (ms).
    pub class_sojourn: [f64; 2],
    /// Offered load of the accepted traffic.
    pub rho: f64,
    /// Fresh requests from associated IoT nodes.
    pub iot_inflow: [f64; 2],
    /// `offload_in[l - 1]`: requests arriving after their `l`-th offload.
    pub offload_in: Vec<[f64; 2]>,
    /// `offload_out[l - 1]`: requests leaving for their `l`-th offload.
    pub offload_out: Vec<[f64; 2]>,
    pub cloud_spill: [f64; 2],
    /// Truncation of the final chain (Light, Heavy).
    pub truncation: (usize, usize),
}

impl FogFlow {
    /// Total inflow from all sources.
    pub fn inflow(&self, t: usize) -> f64 {
        self.iot_inflow[t] + self.offload_in.iter().map(|d| d[t]).sum::<f64>()
    }

    pub fn offloaded(&self, t: usize) -> f64 {
        self.offload_out.iter().map(|b| b[t]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudFlow {
    pub id: usize,
    /// Total arrival rate by type.
    pub l: [f64; 2],
    /// Part of `l` sent directly by IoT nodes.
    pub direct: [f64; 2],
    pub load: CloudLoad,
    /// Mean sojourn by type (ms).
    pub class_sojourn: [f64; 2],
}

impl CloudFlow {
    /// Mean sojourn over both types (ms).
    pub fn mean_sojourn(&self) -> f64 {
        self.load.sojourn
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub mode: PolicyMode,
    pub fogs: Vec<FogFlow>,
    pub clouds: Vec<CloudFlow>,
    pub iterations: usize,
    pub residual: f64,
    /// Residual of every iteration.
    pub trajectory: Vec<f64>,
}

impl FlowSolution {
    fn fog_sum(&self, rtype: Option<RequestType>, f: impl Fn(&FogFlow, usize) -> f64) -> f64 {
        let types: &[usize] = match rtype {
            Some(RequestType::Light) => &[0],
            Some(_) => &[1],
            None => &[0, 1],
        };
        self.fogs.iter().map(|g| types.iter().map(|&t| f(g, t)).sum::<f64>()).sum()
    }

    fn ratio(&self, rtype: Option<RequestType>, f: impl Fn(&FogFlow, usize) -> f64) -> f64 {
        let total = self.fog_sum(rtype, |g, t| g.inflow(t));
        if total == 0.0 {
            f64::NAN
        } else {
            self.fog_sum(rtype, f) / total
        }
    }

    /// Accepted over all fog arrivals.
    pub fn acceptance_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.ratio(rtype, |g, t| g.lambda[t])
    }

    /// Fog-to-fog offloads over all fog arrivals.
    pub fn offload_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.ratio(rtype, |g, t| g.offloaded(t))
    }

    /// Forwards to the cloud over all fog arrivals.
    pub fn cloud_spill_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.ratio(rtype, |g, t| g.cloud_spill[t])
    }
}

/// Offload limit that applies at fog `j`; a node without neighbours can only
/// keep or spill.
fn effective_e_m(t: &Topology, j: usize) -> usize {
    if t.fog[j].neighbors.is_empty() {
        0
    } else {
        t.domain_of_fog(j).e_m as usize
    }
}

/// Fresh fog traffic per fog node and type under `mode`.
pub fn iot_inflow(t: &Topology, mode: PolicyMode) -> Vec<[f64; 2]> {
    let mut inflow = vec![[0.0; 2]; t.fog.len()];
    for iot in &t.iot {
        if let Some(j) = iot.fog_assoc {
            for rt in RequestType::ALL {
                inflow[j][rt.index()] += iot.gamma(rt) * iot.routing(rt, mode).p_fog;
            }
        }
    }
    inflow
}

/// Hop-by-hop flows for fixed acceptance probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct HopFlows {
    /// `delta[l][j]`: arrivals at `j` after `l` offloads (`l = 0` is fresh).
    pub delta: Vec<Vec<[f64; 2]>>,
    /// `beta[l][j]`: requests leaving `j` for their `(l + 1)`-th offload.
    pub beta: Vec<Vec<[f64; 2]>>,
    pub spill: Vec<[f64; 2]>,
    pub lambda: Vec<[f64; 2]>,
}

pub fn propagate(t: &Topology, inflow: &[[f64; 2]], p: &[f64]) -> HopFlows {
    let n = t.fog.len();
    let e_max = (0..n).map(|j| effective_e_m(t, j)).max().unwrap_or(0);
    let mut delta = vec![inflow.to_vec()];
    let mut beta = Vec::with_capacity(e_max);
    for l in 1..=e_max {
        let out: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                if l <= effective_e_m(t, j) {
                    let d = delta[l - 1][j];
                    [(1.0 - p[j]) * d[0], (1.0 - p[j]) * d[1]]
                } else {
                    [0.0; 2]
                }
            })
            .collect();
        let mut next = vec![[0.0; 2]; n];
        for (src, f) in t.fog.iter().enumerate() {
            let deg = f.neighbors.len() as f64;
            for &dst in &f.neighbors {
                next[dst][0] += out[src][0] / deg;
                next[dst][1] += out[src][1] / deg;
            }
        }
        beta.push(out);
        delta.push(next);
    }
    let spill = (0..n)
        .map(|j| {
            let d = delta[effective_e_m(t, j)][j];
            [(1.0 - p[j]) * d[0], (1.0 - p[j]) * d[1]]
        })
        .collect();
    let lambda = (0..n)
        .map(|j| {
            let mut v = [0.0; 2];
            for d in delta.iter().take(effective_e_m(t, j) + 1) {
                v[0] += d[j][0];
                v[1] += d[j][1];
            }
            [p[j] * v[0], p[j] * v[1]]
        })
        .collect();
    HopFlows {
        delta,
        beta,
        spill,
        lambda,
    }
}

fn chain_for(
    t: &Topology,
    j: usize,
    lambda: [f64; 2],
    opts: &ChainOptions,
) -> Result<SteadyState> {
    let f = &t.fog[j];
    solve_chain_with(
        lambda[0],
        lambda[1],
        f.mu_light(),
        f.mu_heavy(),
        t.domain_of_fog(j).q,
        opts,
    )
}

fn saturated(e: &Error) -> bool {
    matches!(e, Error::Overload { .. } | Error::Numeric { .. })
}

fn fog_error(j: usize, e: Error) -> Error {
    match e {
        Error::Overload { rho } => Error::Unstable {
            node: NodeId::Fog(j),
            detail: format!("offered load {rho:.4} >= 1"),
        },
        other => other,
    }
}

/// Solves the coupled flow system by damped fixed-point iteration on the
/// acceptance probabilities, then evaluates the cloud units.
pub fn solve_flows(t: &Topology, mode: PolicyMode, opts: &FlowOptions) -> Result<FlowSolution> {
    if !(opts.omega > 0.0 && opts.omega <= 1.0) {
        return Err(Error::Parameter(format!("damping weight must be in (0, 1], got {}", opts.omega)));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Parameter("tolerance and iteration limit must be positive".into()));
    }
    let n = t.fog.len();
    let inflow = iot_inflow(t, mode);
    let infinite: Vec<bool> = t.fog.iter().map(|f| f.theta == f64::INFINITY).collect();
    let mut p = vec![1.0; n];
    let mut starts = vec![ChainOptions::default().start; n];
    let base = ChainOptions {
        tol: opts.chain_tol,
        ..ChainOptions::default()
    };

    // Each node's excess h = G(P) - P is decreasing in its own P, with
    // h(0) >= 0 and h(1) <= 0, so every node keeps a bracket and takes a
    // secant step inside it, bisecting when the step leaves it. The
    // brackets are reopened when the neighbours' updates move the root
    // outside.
    let mut lo = vec![0.0; n];
    let mut hi = vec![1.0; n];
    let mut last: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut same_sign = vec![0u32; n];
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let flows = propagate(t, &inflow, &p);
        let updates: Vec<Result<(f64, (usize, usize))>> = (0..n)
            .into_par_iter()
            .map(|j| {
                if infinite[j] {
                    return Ok((1.0, starts[j]));
                }
                let copts = ChainOptions {
                    start: starts[j],
                    ..base
                };
                match chain_for(t, j, flows.lambda[j], &copts) {
                    Ok(ss) => {
                        let f = &t.fog[j];
                        let pa = acceptance_prob(&ss, f.mu_light(), f.mu_heavy(), f.theta);
                        Ok((pa, (ss.n_max_light, ss.n_max_heavy)))
                    }
                    // The accepted traffic at this iterate would saturate the
                    // node, so it accepts nothing.
                    Err(e) if saturated(&e) => Ok((0.0, starts[j])),
                    Err(e) => Err(fog_error(j, e)),
                }
            })
            .collect();
        let mut residual: f64 = 0.0;
        let mut g = Vec::with_capacity(n);
        for (j, u) in updates.into_iter().enumerate() {
            let (pa, dims) = u?;
            starts[j] = dims;
            residual = residual.max((pa - p[j]).abs());
            g.push(pa);
        }
        trajectory.push(residual);
        if residual < opts.tol {
            converged = true;
            break;
        }
        for j in 0..n {
            let h = g[j] - p[j];
            if !opts.accelerate {
                p[j] = ((1.0 - opts.omega) * p[j] + opts.omega * g[j]).clamp(0.0, 1.0);
                continue;
            }
            let positive = h > 0.0;
            same_sign[j] = match last[j] {
                Some((_, hp)) if (hp > 0.0) == positive => same_sign[j] + 1,
                _ => 0,
            };
            if positive {
                if p[j] >= hi[j] || same_sign[j] >= STALE_STEPS {
                    hi[j] = (p[j] + 2.0 * (hi[j] - p[j]).max(h)).min(1.0);
                    same_sign[j] = 0;
                }
                lo[j] = p[j];
            } else {
                if p[j] <= lo[j] || same_sign[j] >= STALE_STEPS {
                    lo[j] = (p[j] - 2.0 * (p[j] - lo[j]).max(-h)).max(0.0);
                    same_sign[j] = 0;
                }
                hi[j] = p[j];
            }
            let step = match last[j] {
                Some((pp, hp)) if h != hp => p[j] - h * (p[j] - pp) / (h - hp),
                _ => p[j] + opts.omega * h,
            };
            last[j] = Some((p[j], h));
            p[j] = if step > lo[j] && step < hi[j] {
                step
            } else {
                0.5 * (lo[j] + hi[j])
            };
        }
    }
    let residual = trajectory.last().copied().unwrap_or(0.0);
    if !converged {
        let tail = trajectory[trajectory.len().saturating_sub(TRAJECTORY_LEN)..].to_vec();
        return Err(Error::NoConvergence {
            iterations,
            residual,
            trajectory: tail,
        });
    }

    let flows = propagate(t, &inflow, &p);
    let chains: Vec<Result<SteadyState>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let copts = ChainOptions {
                start: starts[j],
                ..base
            };
            chain_for(t, j, flows.lambda[j], &copts).map_err(|e| fog_error(j, e))
        })
        .collect();
    let mut fogs = Vec::with_capacity(n);
    for (j, ss) in chains.into_iter().enumerate() {
        let ss = ss?;
        let f = &t.fog[j];
        let lambda = flows.lambda[j];
        let w = mean_wait(&ss, f.mu_light(), f.mu_heavy());
        let counts = ss.mean_counts();
        let sojourn = |t: usize, count: f64, z: f64| {
            if lambda[t] > 0.0 {
                count / lambda[t]
            } else {
                w + z
            }
        };
        let e = effective_e_m(t, j);
        fogs.push(FogFlow {
            id: j,
            lambda,
            accept_prob: p[j],
            mean_wait: w,
            class_sojourn: [sojourn(0, counts.0, f.z_light), sojourn(1, counts.1, f.z_heavy)],
            rho: lambda[0] * f.z_light + lambda[1] * f.z_heavy,
            iot_inflow: inflow[j],
            offload_in: flows.delta[1..].iter().take(e).map(|d| d[j]).collect(),
            offload_out: flows.beta.iter().take(e).map(|b| b[j]).collect(),
            cloud_spill: flows.spill[j],
            truncation: (ss.n_max_light, ss.n_max_heavy),
        });
    }

    let clouds = solve_clouds(t, mode, &flows.spill)?;
    Ok(FlowSolution {
        mode,
        fogs,
        clouds,
        iterations,
        residual,
        trajectory,
    })
}

fn solve_clouds(t: &Topology, mode: PolicyMode, spill: &[[f64; 2]]) -> Result<Vec<CloudFlow>> {
    let mut direct = vec![[0.0; 2]; t.cloud.len()];
    for iot in &t.iot {
        for rt in RequestType::ALL {
            direct[iot.cloud_assoc][rt.index()] += iot.gamma(rt) * iot.routing(rt, mode).p_cloud;
        }
    }
    let mut l = direct.clone();
    for (j, f) in t.fog.iter().enumerate() {
        l[f.cloud_assoc][0] += spill[j][0];
        l[f.cloud_assoc][1] += spill[j][1];
    }
    t.cloud
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let load = cloud_load(l[k][0], l[k][1], c)?;
            Ok(CloudFlow {
                id: k,
                l: l[k],
                direct: direct[k],
                load,
                class_sojourn: [
                    load.class_sojourn(c, RequestType::Light),
                    load.class_sojourn(c, RequestType::Heavy),
                ],
            })
        })
        .collect()
}
