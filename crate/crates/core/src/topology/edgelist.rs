//! Plain-text topology format.
//!
//! ```text
//! # fogsim topology v1
//! backbone_rate 10000000
//! domain 0 e_m=1 q=0.5
//! cloud c0 m=4 z_light=0.0001 z_heavy=0.02
//! fog f0 z_light=0.01 z_heavy=2 theta=200 domain=0 cloud=c0
//! iot i0 gamma_light=0.1 gamma_heavy=0 b=1 p_iot=0 p_fog=1 p_cloud=0 a_light=30 a_heavy=400 size_light=800 size_heavy=655360 fog=f0 cloud=c0
//! link i0 f0 1.5 250
//! ```
//!
//! Node lines must use consecutive ids starting at 0 within each layer, in any
//! order. Fog neighbour lists are derived from the fog-fog links. Floats are
//! written with Rust's shortest round-trip formatting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Topology;
use crate::error::{Error, Result};
use crate::model::{CloudSpec, DomainConfig, FogSpec, IotSpec, Link, NodeId};

const HEADER: &str = "# fogsim topology v1";

pub fn to_edge_list(t: &Topology) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "backbone_rate {}", t.backbone_rate).unwrap();
    for d in &t.domains {
        writeln!(s, "domain {} e_m={} q={}", d.id, d.e_m, d.q).unwrap();
    }
    for c in &t.cloud {
        writeln!(
            s,
            "cloud {} m={} z_light={} z_heavy={}",
            NodeId::Cloud(c.id),
            c.m,
            c.z_light,
            c.z_heavy
        )
        .unwrap();
    }
    for f in &t.fog {
        writeln!(
            s,
            "fog {} z_light={} z_heavy={} theta={} domain={} cloud={}",
            NodeId::Fog(f.id),
            f.z_light,
            f.z_heavy,
            f.theta,
            f.domain,
            NodeId::Cloud(f.cloud_assoc)
        )
        .unwrap();
    }
    for i in &t.iot {
        let fog = i.fog_assoc.map_or("-".to_string(), |j| NodeId::Fog(j).to_string());
        writeln!(
            s,
            "iot {} gamma_light={} gamma_heavy={} b={} p_iot={} p_fog={} p_cloud={} \
             a_light={} a_heavy={} size_light={} size_heavy={} fog={} cloud={}",
            NodeId::Iot(i.id),
            i.gamma_light,
            i.gamma_heavy,
            i.b,
            i.p_iot,
            i.p_fog,
            i.p_cloud,
            i.a_light,
            i.a_heavy,
            i.size_light_mean,
            i.size_heavy_mean,
            fog,
            NodeId::Cloud(i.cloud_assoc)
        )
        .unwrap();
    }
    for l in &t.links {
        writeln!(s, "link {} {} {} {}", l.a, l.b, l.prop_delay, l.rate).unwrap();
    }
    s
}

struct Fields<'a> {
    line: usize,
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, tokens: &[&'a str]) -> Result<Self> {
        let mut map = HashMap::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::TopologyParse {
                line,
                message: format!("expected key=value, got `{tok}`"),
            })?;
            if map.insert(k, v).is_some() {
                return Err(Error::TopologyParse {
                    line,
                    message: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self { line, map })
    }

    fn raw(&mut self, key: &str) -> Result<&'a str> {
        self.map.remove(key).ok_or_else(|| Error::TopologyParse {
            line: self.line,
            message: format!("missing `{key}`"),
        })
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.line;
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::TopologyParse {
            line,
            message: format!("bad value `{v}` for `{key}`"),
        })
    }

    fn node(&mut self, key: &str) -> Result<NodeId> {
        let line = self.line;
        let v = self.raw(key)?;
        v.parse().map_err(|message| Error::TopologyParse { line, message })
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::TopologyParse {
                line: self.line,
                message: format!("unknown key `{k}`"),
            }),
            None => Ok(()),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::TopologyParse {
        line,
        message: message.into(),
    }
}

fn node_index(line: usize, s: &str, want: fn(usize) -> NodeId) -> Result<usize> {
    let id: NodeId = s.parse().map_err(|m: String| parse_err(line, m))?;
    let idx = match id {
        NodeId::Iot(i) | NodeId::Fog(i) | NodeId::Cloud(i) => i,
    };
    if want(idx) != id {
        return Err(parse_err(line, format!("`{s}` is in the wrong layer")));
    }
    Ok(idx)
}

fn place<T>(slots: &mut Vec<Option<T>>, idx: usize, item: T, line: usize, what: &str) -> Result<()> {
    if slots.len() <= idx {
        slots.resize_with(idx + 1, || None);
    }
    if slots[idx].is_some() {
        return Err(parse_err(line, format!("duplicate {what} {idx}")));
    }
    slots[idx] = Some(item);
    Ok(())
}

fn dense<T>(slots: Vec<Option<T>>, what: &str) -> Result<Vec<T>> {
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| parse_err(0, format!("{what} {i} is missing"))))
        .collect()
}

pub fn from_edge_list(text: &str) -> Result<Topology> {
    let mut backbone = None;
    let mut domains: Vec<Option<DomainConfig>> = Vec::new();
    let mut clouds: Vec<Option<CloudSpec>> = Vec::new();
    let mut fogs: Vec<Option<FogSpec>> = Vec::new();
    let mut iots: Vec<Option<IotSpec>> = Vec::new();
    let mut links = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "backbone_rate" => {
                let v = tokens.get(1).ok_or_else(|| parse_err(line, "missing rate"))?;
                backbone = Some(v.parse::<f64>().map_err(|_| parse_err(line, "bad rate"))?);
            }
            "domain" => {
                let id: usize = tokens
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(line, "bad domain id"))?;
                let mut f = Fields::parse(line, &tokens[2..])?;
                let d = DomainConfig {
                    id,
                    e_m: f.get("e_m")?,
                    q: f.get("q")?,
                };
                f.finish()?;
                place(&mut domains, id, d, line, "domain")?;
            }
            "cloud" => {
                let id = node_index(line, tokens.get(1).unwrap_or(&""), NodeId::Cloud)?;
                let mut f = Fields::parse(line, &tokens[2..])?;
                let c = CloudSpec {
                    id,
                    m: f.get("m")?,
                    z_light: f.get("z_light")?,
                    z_heavy: f.get("z_heavy")?,
                };
                f.finish()?;
                place(&mut clouds, id, c, line, "cloud")?;
            }
            "fog" => {
                let id = node_index(line, tokens.get(1).unwrap_or(&""), NodeId::Fog)?;
                let mut f = Fields::parse(line, &tokens[2..])?;
                let cloud = match f.node("cloud")? {
                    NodeId::Cloud(k) => k,
                    other => return Err(parse_err(line, format!("`{other}` is not a cloud"))),
                };
                let spec = FogSpec {
                    id,
                    z_light: f.get("z_light")?,
                    z_heavy: f.get("z_heavy")?,
                    theta: f.get("theta")?,
                    domain: f.get("domain")?,
                    cloud_assoc: cloud,
                    neighbors: Vec::new(),
                };
                f.finish()?;
                place(&mut fogs, id, spec, line, "fog")?;
            }
            "iot" => {
                let id = node_index(line, tokens.get(1).unwrap_or(&""), NodeId::Iot)?;
                let mut f = Fields::parse(line, &tokens[2..])?;
                let fog_assoc = match f.raw("fog")? {
                    "-" => None,
                    s => Some(node_index(line, s, NodeId::Fog)?),
                };
                let cloud = match f.node("cloud")? {
                    NodeId::Cloud(k) => k,
                    other => return Err(parse_err(line, format!("`{other}` is not a cloud"))),
                };
                let spec = IotSpec {
                    id,
                    gamma_light: f.get("gamma_light")?,
                    gamma_heavy: f.get("gamma_heavy")?,
                    b: f.get("b")?,
                    p_iot: f.get("p_iot")?,
                    p_fog: f.get("p_fog")?,
                    p_cloud: f.get("p_cloud")?,
                    a_light: f.get("a_light")?,
                    a_heavy: f.get("a_heavy")?,
                    size_light_mean: f.get("size_light")?,
                    size_heavy_mean: f.get("size_heavy")?,
                    fog_assoc,
                    cloud_assoc: cloud,
                };
                f.finish()?;
                place(&mut iots, id, spec, line, "iot")?;
            }
            "link" => {
                if tokens.len() != 5 {
                    return Err(parse_err(line, "expected `link src dst prop_delay_ms rate_bits_per_ms`"));
                }
                let a: NodeId = tokens[1].parse().map_err(|m: String| parse_err(line, m))?;
                let b: NodeId = tokens[2].parse().map_err(|m: String| parse_err(line, m))?;
                let prop_delay = tokens[3].parse().map_err(|_| parse_err(line, "bad delay"))?;
                let rate = tokens[4].parse().map_err(|_| parse_err(line, "bad rate"))?;
                links.push(Link {
                    a,
                    b,
                    prop_delay,
                    rate,
                });
            }
            other => return Err(parse_err(line, format!("unknown record `{other}`"))),
        }
    }

    let backbone = backbone.ok_or_else(|| parse_err(0, "missing backbone_rate"))?;
    Ok(Topology::new(
        dense(iots, "iot")?,
        dense(fogs, "fog")?,
        dense(clouds, "cloud")?,
        links,
        dense(domains, "domain")?,
        backbone,
    ))
}

pub fn read_file(path: &Path) -> Result<Topology> {
    from_edge_list(&std::fs::read_to_string(path)?)
}

pub fn write_file(t: &Topology, path: &Path) -> Result<()> {
    std::fs::write(path, to_edge_list(t))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = presets::preset("setting2").unwrap();
        cfg.network.n_iot = 30;
        cfg.network.n_fog = 6;
        cfg.network.n_cloud = 2;
        cfg.network.avg_degree = 2.0;
        let t = crate::topology::build(&cfg).unwrap();
        let text = to_edge_list(&t);
        let back = from_edge_list(&text).unwrap();
        assert_eq!(t, back);
        assert_eq!(text, to_edge_list(&back));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = from_edge_list("backbone_rate 1\nfog f0 z_light=1\n").unwrap_err();
        match err {
            Error::TopologyParse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        assert!(from_edge_list("bogus 1").is_err());
        assert!(from_edge_list("backbone_rate 1\ncloud f0 m=1 z_light=1 z_heavy=1").is_err());
    }
}
