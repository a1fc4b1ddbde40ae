use std::collections::BTreeMap;
use std::io::Write;

use crate::model::{PolicyMode, RequestType, Route};

/// Student t quantile for a two-sided 95% interval with 31 degrees of freedom.
const T_975_31: f64 = 2.039_513_446;
pub const N_BATCHES: usize = 32;

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Mean, or NaN when empty.
    pub fn mean_or_nan(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }
}

/// Delay samples of one request class, in completion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayStats {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    /// Half-width of the 95% confidence interval of the mean, from batch
    /// means over `N_BATCHES` consecutive batches.
    pub ci95: f64,
    pub samples: Vec<f64>,
}

impl DelayStats {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                variance: f64::NAN,
                ci95: f64::NAN,
                ..Self::default()
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let ci95 = if n >= 2 * N_BATCHES {
            let size = n / N_BATCHES;
            let batch_means: Vec<f64> = (0..N_BATCHES)
                .map(|b| {
                    let end = if b + 1 == N_BATCHES { n } else { (b + 1) * size };
                    let chunk = &samples[b * size..end];
                    chunk.iter().sum::<f64>() / chunk.len() as f64
                })
                .collect();
            let bm = batch_means.iter().sum::<f64>() / N_BATCHES as f64;
            let var = batch_means.iter().map(|x| (x - bm).powi(2)).sum::<f64>()
                / (N_BATCHES - 1) as f64;
            T_975_31 * (var / N_BATCHES as f64).sqrt()
        } else if n > 1 {
            1.96 * (variance / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            count: n as u64,
            mean,
            variance,
            ci95,
            samples,
        }
    }
}

/// Fog decision counters, indexed by request type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FogMetrics {
    /// Requests that reached this node, fresh or offloaded.
    pub arrivals: [u64; 2],
    pub accepted: [u64; 2],
    /// Offloads to a neighbour, by type.
    pub offloaded: [u64; 2],
    /// Forwards to the cloud at the offload limit, by type.
    pub spilled: [u64; 2],
    /// `offloads_by_hop[l]` counts requests this node offloaded for the
    /// `(l + 1)`-th time.
    pub offloads_by_hop: Vec<u64>,
    /// Time from acceptance to end of processing, by type.
    pub sojourn: [Summary; 2],
}

impl FogMetrics {
    pub fn acceptance_rate(&self) -> f64 {
        ratio(self.accepted.iter().sum(), self.arrivals.iter().sum())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

/// One completed request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub id: u64,
    pub rtype: RequestType,
    pub route: Route,
    pub n_fwd: u32,
    pub created_ms: f64,
    pub completed_ms: f64,
    pub delay_ms: f64,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "type", "route", "n_fwd", "created_ms", "completed_ms", "delay_ms"])?;
    for r in records {
        w.write_record([
            r.id.to_string(),
            r.rtype.to_string(),
            r.route.as_str().to_string(),
            r.n_fwd.to_string(),
            r.created_ms.to_string(),
            r.completed_ms.to_string(),
            r.delay_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Time-weighted occupancy of one fog node over `(light, heavy)` counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Occupancy {
    pub fog: usize,
    pub time: BTreeMap<(u64, u64), f64>,
}

impl Occupancy {
    /// Fraction of observed time spent in each state.
    pub fn distribution(&self) -> BTreeMap<(u64, u64), f64> {
        let total: f64 = self.time.values().sum();
        self.time.iter().map(|(&k, &v)| (k, v / total)).collect()
    }
}

/// Everything measured in one run. Statistics exclude the warm-up
/// completions; `generated` and `completed` count every request.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mode: PolicyMode,
    pub seed: u64,
    pub n_requests: u64,
    pub generated: u64,
    pub completed: u64,
    pub warmup: u64,
    /// Simulated time at termination (ms).
    pub end_time: f64,
    /// Service delay by request type.
    pub delay: [DelayStats; 2],
    /// Service delay of both types together.
    pub delay_all: DelayStats,
    /// Time from first fog arrival to response receipt, fog-routed requests.
    pub fog_layer_delay: [Summary; 2],
    /// Completed requests by route chosen at the IoT node.
    pub routes: [[u64; 3]; 2],
    /// Completed requests by number of fog-to-fog offloads.
    pub n_fwd_hist: Vec<u64>,
    pub fog: Vec<FogMetrics>,
    /// Time from cloud arrival to end of processing, per server and type.
    pub cloud_sojourn: Vec<[Summary; 2]>,
    pub occupancy: Option<Occupancy>,
    pub trace: Vec<TraceRecord>,
}

impl Metrics {
    pub fn delay_stats(&self, rtype: Option<RequestType>) -> &DelayStats {
        match rtype {
            Some(t) => &self.delay[t.index()],
            None => &self.delay_all,
        }
    }

    fn fog_sum(&self, rtype: Option<RequestType>, f: impl Fn(&FogMetrics) -> [u64; 2]) -> u64 {
        self.fog
            .iter()
            .map(|m| {
                let v = f(m);
                match rtype {
                    Some(t) => v[t.index()],
                    None => v[0] + v[1],
                }
            })
            .sum()
    }

    fn fog_arrivals(&self, rtype: Option<RequestType>) -> u64 {
        self.fog_sum(rtype, |m| m.arrivals)
    }

    /// Accepted fog arrivals over all fog arrivals.
    pub fn acceptance_rate(&self, rtype: Option<RequestType>) -> f64 {
        ratio(self.fog_sum(rtype, |m| m.accepted), self.fog_arrivals(rtype))
    }

    /// Fog-to-fog offloads over all fog arrivals.
    pub fn offload_rate(&self, rtype: Option<RequestType>) -> f64 {
        ratio(self.fog_sum(rtype, |m| m.offloaded), self.fog_arrivals(rtype))
    }

    /// Forwards to the cloud over all fog arrivals.
    pub fn cloud_spill_rate(&self, rtype: Option<RequestType>) -> f64 {
        ratio(self.fog_sum(rtype, |m| m.spilled), self.fog_arrivals(rtype))
    }

    pub fn max_n_fwd(&self) -> u32 {
        self.n_fwd_hist.iter().rposition(|&c| c > 0).unwrap_or(0) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_trace_mean() {
        let s = DelayStats::from_samples(vec![120.0, 30.0, 60.0]);
        assert_eq!(s.count, 3);
        assert!((s.mean - 70.0).abs() < 1e-12);
        assert!((s.variance - 2100.0).abs() < 1e-9);
    }

    #[test]
    fn batch_means_ci_shrinks_with_n() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let small = DelayStats::from_samples((0..1_000).map(|_| rng.random::<f64>()).collect());
        let large = DelayStats::from_samples((0..100_000).map(|_| rng.random::<f64>()).collect());
        assert!(large.ci95 < small.ci95);
        // sd of U[0,1] is 0.2887, so the iid half-width at 1e5 is ~0.0018.
        assert!((large.ci95 - 0.0018).abs() < 0.001, "{}", large.ci95);
    }

    #[test]
    fn summary_matches_two_pass() {
        let xs = [1.0, 4.0, 9.0, 16.0];
        let mut s = Summary::default();
        xs.iter().for_each(|&x| s.push(x));
        let d = DelayStats::from_samples(xs.to_vec());
        assert!((s.mean - d.mean).abs() < 1e-12);
        assert!((s.variance() - d.variance).abs() < 1e-12);
    }

    #[test]
    fn empty_stats_are_nan() {
        assert!(DelayStats::from_samples(vec![]).mean.is_nan());
    }
}
