//! Expected service delay of every IoT node from a converged flow solution.

use super::flows::FlowSolution;
use crate::error::{Error, Result};
use crate::model::{IotSpec, NodeId, PolicyMode, RequestType, Routing};
use crate::topology::{PathCost, Topology};

/// Time a request spends at the fog node that accepts it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FogDelayTerm {
    /// Mean time from acceptance to end of processing for the request's
    /// class, from the chain's mean counts.
    #[default]
    ClassSojourn,
    /// Mean backlog seen on arrival, without the request's own processing.
    MeanWait,
}

/// Delay components of one request type at one IoT node (ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeDelay {
    pub routing: Routing,
    /// `p_iot` times the local processing time.
    pub local: f64,
    /// `p_fog` times uplink plus fog-layer delay.
    pub fog: f64,
    /// `p_cloud` times the direct cloud round trip.
    pub cloud: f64,
    /// Fog-layer delay of a fog-bound request, from first fog arrival to
    /// response receipt.
    pub fog_layer: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IotDelay {
    pub iot: usize,
    pub by_type: [TypeDelay; 2],
    /// Components mixed over the request types by their shares.
    pub local: f64,
    pub fog: f64,
    pub cloud: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayBreakdown {
    pub mode: PolicyMode,
    pub term: FogDelayTerm,
    pub entries: Vec<IotDelay>,
    /// Unweighted mean of the per-node delays.
    pub objective: f64,
    /// Request rate of each node and type, for weighted means.
    weights: Vec<[f64; 2]>,
    fog_weights: Vec<[f64; 2]>,
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (v, w) in values {
        if w > 0.0 {
            num += v * w;
            den += w;
        }
    }
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

impl DelayBreakdown {
    fn types(rtype: Option<RequestType>) -> &'static [usize] {
        match rtype {
            Some(RequestType::Light) => &[0],
            Some(RequestType::Heavy) => &[1],
            None => &[0, 1],
        }
    }

    /// Mean delay per request, weighting every node and type by its
    /// generation rate.
    pub fn mean_delay(&self, rtype: Option<RequestType>) -> f64 {
        let types = Self::types(rtype);
        weighted_mean(self.entries.iter().zip(&self.weights).flat_map(|(e, w)| {
            types.iter().map(move |&t| (e.by_type[t].total, w[t]))
        }))
    }

    /// Mean fog-layer delay per fog-bound request.
    pub fn mean_fog_layer(&self, rtype: Option<RequestType>) -> f64 {
        let types = Self::types(rtype);
        weighted_mean(self.entries.iter().zip(&self.fog_weights).flat_map(|(e, w)| {
            types.iter().map(move |&t| (e.by_type[t].fog_layer, w[t]))
        }))
    }
}

fn cost(t: &Topology, a: NodeId, b: NodeId) -> Result<PathCost> {
    t.path_cost(a, b)
        .ok_or_else(|| Error::Parameter(format!("no link between {a} and {b}")))
}

fn fog_term(flow: &FlowSolution, j: usize, ti: usize, term: FogDelayTerm) -> f64 {
    let f = &flow.fogs[j];
    match term {
        FogDelayTerm::ClassSojourn => f.class_sojourn[ti],
        FogDelayTerm::MeanWait => f.mean_wait,
    }
}

/// Expected delay from the arrival of a request of `iot` at its fog node
/// until the response reaches `iot`, before any offload. Offloads go to a
/// uniformly chosen neighbour; at the offload limit the request goes to the
/// node's cloud server, which answers the IoT node directly.
pub fn fog_layer_delay(
    flow: &FlowSolution,
    t: &Topology,
    iot: &IotSpec,
    rtype: RequestType,
    term: FogDelayTerm,
) -> Result<f64> {
    let j0 = iot
        .fog_assoc
        .ok_or_else(|| Error::Parameter(format!("IoT node {} has no fog node", iot.id)))?;
    let levels = fog_layer_levels(flow, t, iot, rtype, term)?;
    Ok(levels[0][j0])
}

/// `L[x][j]`: fog-layer delay of a request of `iot` arriving at fog `j`
/// after `x` offloads.
fn fog_layer_levels(
    flow: &FlowSolution,
    t: &Topology,
    iot: &IotSpec,
    rtype: RequestType,
    term: FogDelayTerm,
) -> Result<Vec<Vec<f64>>> {
    let ti = rtype.index();
    let size = iot.size_mean(rtype);
    let me = NodeId::Iot(iot.id);
    let n = t.fog.len();
    let e_m: Vec<usize> = (0..n)
        .map(|j| {
            if t.fog[j].neighbors.is_empty() {
                0
            } else {
                t.domain_of_fog(j).e_m as usize
            }
        })
        .collect();
    let e_max = e_m.iter().copied().max().unwrap_or(0);

    let mut kept = Vec::with_capacity(n);
    let mut spilled = Vec::with_capacity(n);
    for (j, f) in t.fog.iter().enumerate() {
        let back = cost(t, NodeId::Fog(j), me)?.delay(size);
        kept.push(fog_term(flow, j, ti, term) + back);
        let k = f.cloud_assoc;
        let up = cost(t, NodeId::Fog(j), NodeId::Cloud(k))?.delay(size);
        let down = cost(t, NodeId::Cloud(k), me)?.delay(size);
        spilled.push(up + flow.clouds[k].class_sojourn[ti] + down);
    }

    let mut levels = vec![vec![0.0; n]; e_max + 1];
    for x in (0..=e_max).rev() {
        for j in 0..n {
            let p = flow.fogs[j].accept_prob;
            let away = if x < e_m[j] {
                let nbrs = &t.fog[j].neighbors;
                let mut sum = 0.0;
                for &nb in nbrs {
                    let hop = cost(t, NodeId::Fog(j), NodeId::Fog(nb))?.delay(size);
                    sum += hop + levels[x + 1][nb];
                }
                sum / nbrs.len() as f64
            } else {
                spilled[j]
            };
            levels[x][j] = p * kept[j] + (1.0 - p) * away;
        }
    }
    Ok(levels)
}

/// Service delay of one IoT node, by type and mixed.
pub fn service_delay(
    flow: &FlowSolution,
    t: &Topology,
    iot: &IotSpec,
    term: FogDelayTerm,
) -> Result<IotDelay> {
    let me = NodeId::Iot(iot.id);
    let k = iot.cloud_assoc;
    let mut by_type = [None, None];
    for rt in RequestType::ALL {
        let ti = rt.index();
        let size = iot.size_mean(rt);
        let r = iot.routing(rt, flow.mode);
        let local = r.p_iot * iot.local_time(rt);
        let (fog, fog_layer) = if r.p_fog > 0.0 {
            let j = iot.fog_assoc.ok_or_else(|| {
                Error::Parameter(format!("IoT node {} routes to fog but has no fog node", iot.id))
            })?;
            let l = fog_layer_delay(flow, t, iot, rt, term)?;
            let up = cost(t, me, NodeId::Fog(j))?.delay(size);
            (r.p_fog * (up + l), l)
        } else {
            (0.0, f64::NAN)
        };
        let cloud = if r.p_cloud > 0.0 {
            let path = cost(t, me, NodeId::Cloud(k))?;
            r.p_cloud * (path.delay(size) + flow.clouds[k].class_sojourn[ti] + path.delay(size))
        } else {
            0.0
        };
        by_type[ti] = Some(TypeDelay {
            routing: r,
            local,
            fog,
            cloud,
            fog_layer,
            total: local + fog + cloud,
        });
    }
    let by_type = by_type.map(|d| d.expect("both types evaluated"));
    let mix = |f: fn(&TypeDelay) -> f64| {
        RequestType::ALL
            .iter()
            .map(|&rt| iot.type_share(rt) * f(&by_type[rt.index()]))
            .sum::<f64>()
    };
    let local = mix(|d| d.local);
    let fog = mix(|d| d.fog);
    let cloud = mix(|d| d.cloud);
    Ok(IotDelay {
        iot: iot.id,
        by_type,
        local,
        fog,
        cloud,
        total: local + fog + cloud,
    })
}

/// Service delay of every IoT node.
pub fn delay_breakdown(flow: &FlowSolution, t: &Topology, term: FogDelayTerm) -> Result<DelayBreakdown> {
    let entries = t
        .iot
        .iter()
        .map(|i| service_delay(flow, t, i, term))
        .collect::<Result<Vec<_>>>()?;
    let weights = t.iot.iter().map(|i| [i.gamma_light, i.gamma_heavy]).collect();
    let fog_weights = t
        .iot
        .iter()
        .map(|i| {
            RequestType::ALL.map(|rt| i.gamma(rt) * i.routing(rt, flow.mode).p_fog)
        })
        .collect();
    Ok(DelayBreakdown {
        mode: flow.mode,
        term,
        objective: objective(&entries),
        entries,
        weights,
        fog_weights,
    })
}

/// Mean service delay over IoT nodes.
pub fn objective(entries: &[IotDelay]) -> f64 {
    if entries.is_empty() {
        return f64::NAN;
    }
    entries.iter().map(|e| e.total).sum::<f64>() / entries.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::flows::tests::ring;
    use crate::analytic::flows::{solve_flows, FlowOptions};

    fn leg(t: &Topology, a: NodeId, b: NodeId, size: f64) -> f64 {
        t.path_cost(a, b).unwrap().delay(size)
    }

    #[test]
    fn boundary_case_without_forwarding() {
        let t = ring(1, 5.0, 0, [0.2, 0.15], 1.0);
        let flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        let iot = &t.iot[0];
        for rt in RequestType::ALL {
            let ti = rt.index();
            let s = iot.size_mean(rt);
            let f = &flow.fogs[0];
            let p = f.accept_prob;
            let (fi, ff, c) = (NodeId::Iot(0), NodeId::Fog(0), NodeId::Cloud(0));
            let expected = p * (f.mean_wait + leg(&t, ff, fi, s))
                + (1.0 - p)
                    * (leg(&t, ff, c, s) + flow.clouds[0].class_sojourn[ti] + leg(&t, c, fi, s));
            let got = fog_layer_delay(&flow, &t, iot, rt, FogDelayTerm::MeanWait).unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
    }

    #[test]
    fn certain_acceptance_is_wait_plus_return() {
        let t = ring(3, f64::INFINITY, 2, [0.1, 0.05], 1.0);
        let flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        let iot = &t.iot[1];
        let got = fog_layer_delay(&flow, &t, iot, RequestType::Heavy, FogDelayTerm::MeanWait).unwrap();
        let expected = flow.fogs[1].mean_wait + leg(&t, NodeId::Fog(1), NodeId::Iot(1), 8000.0);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn depth_one_tree_by_hand() {
        let t = ring(2, 6.0, 1, [0.2, 0.1], 1.0);
        let mut flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        for f in &mut flow.fogs {
            f.accept_prob = 0.5;
            f.mean_wait = 10.0;
        }
        // Every link in the ring fixture carries 1e4 bits/ms; Light is 800 bits.
        let y = 800.0 / 1e4;
        let back = 1.0 + y; // fog -> IoT
        let hop = 0.5 + y; // fog -> fog
        let up = 18.0 + y; // fog -> cloud
        let down = 20.0 + y + 800.0 / 1e6; // cloud -> IoT over the backbone
        let h = flow.clouds[0].class_sojourn[0];
        let at_neighbour = 0.5 * (10.0 + back) + 0.5 * (up + h + down);
        let expected = 0.5 * (10.0 + back) + 0.5 * (hop + at_neighbour);
        let got = fog_layer_delay(&flow, &t, &t.iot[0], RequestType::Light, FogDelayTerm::MeanWait).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn local_only_node() {
        let mut t = ring(2, 6.0, 1, [0.8, 0.2], 1.0);
        for i in &mut t.iot {
            i.p_iot = 1.0;
            i.p_fog = 0.0;
            i.p_cloud = 0.0;
            i.b = 0.8;
        }
        let flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        let d = service_delay(&flow, &t, &t.iot[0], FogDelayTerm::default()).unwrap();
        assert!((d.total - 104.0).abs() < 1e-12);
    }

    #[test]
    fn fog_only_node_and_component_sums() {
        let t = ring(3, 5.0, 1, [0.2, 0.1], 1.0);
        let flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        let b = delay_breakdown(&flow, &t, FogDelayTerm::default()).unwrap();
        for (e, iot) in b.entries.iter().zip(&t.iot) {
            for rt in RequestType::ALL {
                let d = &e.by_type[rt.index()];
                let up = leg(&t, NodeId::Iot(iot.id), NodeId::Fog(iot.fog_assoc.unwrap()), iot.size_mean(rt));
                assert!((d.total - (up + d.fog_layer)).abs() < 1e-9);
                assert!(d.local >= 0.0 && d.fog >= 0.0 && d.cloud >= 0.0);
            }
            assert!((e.local + e.fog + e.cloud - e.total).abs() < 1e-9);
        }
        let mean = b.entries.iter().map(|e| e.total).sum::<f64>() / 3.0;
        assert!((b.objective - mean).abs() < 1e-12);
    }

    #[test]
    fn nfp_uses_cloud_for_fog_share() {
        let t = ring(2, 5.0, 1, [0.2, 0.1], 0.6);
        let flow = solve_flows(&t, PolicyMode::Nfp, &FlowOptions::default()).unwrap();
        let d = service_delay(&flow, &t, &t.iot[0], FogDelayTerm::default()).unwrap();
        for td in &d.by_type {
            assert_eq!(td.fog, 0.0);
            assert_eq!(td.routing.p_cloud, 1.0);
        }
    }
}
