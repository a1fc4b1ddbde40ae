//! Event-driven simulation of the full request lifecycle.
//!
//! One run is single-threaded and fully determined by the topology, the
//! options and the seed. Every (IoT node, request type) pair owns a random
//! stream for its arrivals, routing draws, sizes and work, so runs that
//! differ only in policy parameters see the same request sequence.

mod metrics;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub use metrics::{
    write_trace, DelayStats, FogMetrics, Metrics, Occupancy, Summary, TraceRecord, N_BATCHES,
};
pub use crate::topology::transmission_delay;

use crate::error::{Error, Result};
use crate::model::{FogDiscipline, NodeId, PolicyMode, Request, RequestType, Route, ScenarioConfig};
use crate::policy::{
    best_neighbor, decide, estimate_waiting, light_share, route_from_iot, update_estimate,
    OffloadDecision, ReachabilityEntry, WaitingTimeEstimator,
};
use crate::topology::{PathCost, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub mode: PolicyMode,
    /// Requests generated; the run ends once all of them have completed.
    pub n_requests: u64,
    pub seed: u64,
    pub alpha: f64,
    pub announce_period: f64,
    pub warmup_fraction: f64,
    pub queue_cap: usize,
    pub discipline: FogDiscipline,
    /// Record the time-weighted occupancy of this fog node.
    pub track_occupancy: Option<usize>,
    pub trace: bool,
}

impl SimOptions {
    pub fn from_config(cfg: &ScenarioConfig, mode: PolicyMode, n_requests: u64, seed: u64) -> Self {
        Self {
            mode,
            n_requests,
            seed,
            alpha: cfg.policy.alpha,
            announce_period: cfg.policy.announce_period_ms,
            warmup_fraction: cfg.sim.warmup_fraction,
            queue_cap: cfg.sim.queue_cap,
            discipline: cfg.sim.discipline,
            track_occupancy: None,
            trace: false,
        }
    }
}

/// Picks the class of the next job at a service start. Light is chosen with
/// probability `light_share(c_light, c_heavy, q)`, using `u` in [0,1).
pub fn select_next_job(c_light: u64, c_heavy: u64, q: f64, u: f64) -> Result<RequestType> {
    if c_light + c_heavy == 0 {
        return Err(Error::Parameter("no job to select: both classes are empty".into()));
    }
    if u < light_share(c_light, c_heavy, q) {
        Ok(RequestType::Light)
    } else {
        Ok(RequestType::Heavy)
    }
}

/// Marks a request complete and returns its service delay.
pub fn complete_request(req: &mut Request, now: f64) -> Result<f64> {
    if req.completed_at.is_some() {
        return Err(Error::Parameter(format!("request {} completed twice", req.id)));
    }
    req.completed_at = Some(now);
    Ok(now - req.created_at)
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Generate { iot: usize, rtype: RequestType },
    FogArrival { req: usize, fog: usize },
    FogDone { fog: usize, epoch: u64 },
    CloudArrival { req: usize, cloud: usize },
    CloudDone { cloud: usize, unit: usize },
    Complete { req: usize },
    AnnounceTick,
    AnnounceDeliver { to: usize, from: usize, waiting: f64, sent: f64 },
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct FogJob {
    req: usize,
    accepted_at: f64,
    /// Processing time still owed; `None` until the job first enters service.
    remaining: Option<f64>,
}

struct FogRuntime {
    queue: [VecDeque<FogJob>; 2],
    /// Job in service and its completion time.
    busy: Option<(FogJob, f64)>,
    /// Bumped whenever a completion is scheduled, so superseded ones go stale.
    epoch: u64,
    /// Under sharing, the time the head jobs' remaining work was last updated.
    shared_at: f64,
    est: WaitingTimeEstimator,
    table: Vec<ReachabilityEntry>,
}

#[derive(Default)]
struct CloudUnit {
    queue: VecDeque<(usize, f64)>,
    busy: Option<(usize, f64)>,
}

struct Engine<'a> {
    t: &'a Topology,
    o: &'a SimOptions,
    now: f64,
    seq: u64,
    heap: BinaryHeap<Event>,
    reqs: Vec<Request>,
    free: Vec<usize>,
    streams: Vec<[ChaCha8Rng; 2]>,
    sched: ChaCha8Rng,
    fogs: Vec<FogRuntime>,
    clouds: Vec<Vec<CloudUnit>>,
    iot_fog: Vec<Option<PathCost>>,
    iot_cloud: Vec<Option<PathCost>>,
    generated: u64,
    completed: u64,
    warmup: u64,
    samples: [Vec<f64>; 2],
    samples_all: Vec<f64>,
    fog_layer: [Summary; 2],
    routes: [[u64; 3]; 2],
    n_fwd_hist: Vec<u64>,
    fog_m: Vec<FogMetrics>,
    cloud_m: Vec<[Summary; 2]>,
    occupancy: Option<(Occupancy, f64)>,
    trace: Vec<TraceRecord>,
}

fn missing_link(a: NodeId, b: NodeId) -> Error {
    Error::Parameter(format!("no link between {a} and {b}"))
}

impl<'a> Engine<'a> {
    fn new(t: &'a Topology, o: &'a SimOptions) -> Result<Self> {
        let n_fog = t.fog.len();
        let n_cloud = t.cloud.len();
        let streams = (0..t.iot.len())
            .map(|i| {
                [0u64, 1].map(|k| {
                    let mut r = ChaCha8Rng::seed_from_u64(o.seed);
                    r.set_stream(1 + 2 * i as u64 + k);
                    r
                })
            })
            .collect();
        let mut sched = ChaCha8Rng::seed_from_u64(o.seed);
        sched.set_stream(0);
        let fogs = t
            .fog
            .iter()
            .map(|f| FogRuntime {
                queue: [VecDeque::new(), VecDeque::new()],
                busy: None,
                epoch: 0,
                shared_at: 0.0,
                est: WaitingTimeEstimator::new(f.z_light, f.z_heavy, o.alpha),
                table: f
                    .neighbors
                    .iter()
                    .map(|&nb| ReachabilityEntry {
                        node_id: nb,
                        rtt: t.fog_rtt(f.id, nb).unwrap_or(0.0),
                        est_waiting: 0.0,
                        announced_at: 0.0,
                    })
                    .collect(),
            })
            .collect();
        let clouds = t
            .cloud
            .iter()
            .map(|c| (0..c.m).map(|_| CloudUnit::default()).collect())
            .collect();
        let mut iot_fog = Vec::with_capacity(t.iot.len() * n_fog);
        let mut iot_cloud = Vec::with_capacity(t.iot.len() * n_cloud);
        for i in 0..t.iot.len() {
            for j in 0..n_fog {
                iot_fog.push(t.path_cost(NodeId::Iot(i), NodeId::Fog(j)));
            }
            for k in 0..n_cloud {
                iot_cloud.push(t.path_cost(NodeId::Iot(i), NodeId::Cloud(k)));
            }
        }
        let e_max = t.domains.iter().map(|d| d.e_m).max().unwrap_or(0) as usize;
        Ok(Self {
            t,
            o,
            now: 0.0,
            seq: 0,
            heap: BinaryHeap::new(),
            reqs: Vec::new(),
            free: Vec::new(),
            streams,
            sched,
            fogs,
            clouds,
            iot_fog,
            iot_cloud,
            generated: 0,
            completed: 0,
            warmup: (o.warmup_fraction * o.n_requests as f64).floor() as u64,
            samples: [Vec::new(), Vec::new()],
            samples_all: Vec::new(),
            fog_layer: [Summary::default(); 2],
            routes: [[0; 3]; 2],
            n_fwd_hist: vec![0; e_max + 1],
            fog_m: (0..n_fog)
                .map(|_| FogMetrics {
                    offloads_by_hop: vec![0; e_max],
                    ..FogMetrics::default()
                })
                .collect(),
            cloud_m: vec![[Summary::default(); 2]; n_cloud],
            occupancy: o.track_occupancy.filter(|&j| j < n_fog).map(|fog| {
                (
                    Occupancy {
                        fog,
                        ..Occupancy::default()
                    },
                    0.0,
                )
            }),
            trace: Vec::new(),
        })
    }

    fn schedule(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn counting(&self) -> bool {
        self.completed >= self.warmup
    }

    fn iot_fog_cost(&self, i: usize, j: usize) -> Result<PathCost> {
        self.iot_fog[i * self.t.fog.len() + j].ok_or(missing_link(NodeId::Iot(i), NodeId::Fog(j)))
    }

    fn iot_cloud_cost(&self, i: usize, k: usize) -> Result<PathCost> {
        self.iot_cloud[i * self.t.cloud.len() + k]
            .ok_or(missing_link(NodeId::Iot(i), NodeId::Cloud(k)))
    }

    fn cost(&self, a: NodeId, b: NodeId) -> Result<PathCost> {
        self.t.path_cost(a, b).ok_or(missing_link(a, b))
    }

    fn next_arrival(&mut self, iot: usize, rtype: RequestType) {
        let gamma = self.t.iot[iot].gamma(rtype);
        let gap: f64 = self.streams[iot][rtype.index()].sample(Exp1);
        self.schedule(self.now + gap / gamma, Kind::Generate { iot, rtype });
    }

    /// Adds the time spent in the current state of the tracked fog node.
    fn touch_occupancy(&mut self, j: usize) {
        let counting = self.counting();
        let now = self.now;
        let Some((occ, last)) = self.occupancy.as_mut() else {
            return;
        };
        if occ.fog != j {
            return;
        }
        if counting {
            let est = &self.fogs[j].est;
            *occ.time.entry((est.c_light, est.c_heavy)).or_insert(0.0) += now - *last;
        }
        *last = now;
    }

    fn run(mut self) -> Result<Metrics> {
        if self.o.n_requests == 0 {
            return Err(Error::Parameter("n_requests must be ≥ 1".into()));
        }
        let total_rate: f64 = self.t.iot.iter().map(|i| i.gamma_light + i.gamma_heavy).sum();
        if !(total_rate > 0.0) {
            return Err(Error::Parameter("no IoT node generates requests".into()));
        }
        for i in 0..self.t.iot.len() {
            for rtype in RequestType::ALL {
                if self.t.iot[i].gamma(rtype) > 0.0 {
                    self.next_arrival(i, rtype);
                }
            }
        }
        if self.o.mode != PolicyMode::Nfp && self.fogs.iter().any(|f| !f.table.is_empty()) {
            self.schedule(0.0, Kind::AnnounceTick);
        }

        while self.completed < self.o.n_requests {
            let ev = self
                .heap
                .pop()
                .ok_or_else(|| Error::Parameter("event queue ran dry".into()))?;
            self.now = ev.time;
            match ev.kind {
                Kind::Generate { iot, rtype } => self.on_generate(iot, rtype)?,
                Kind::FogArrival { req, fog } => self.on_fog_arrival(req, fog)?,
                Kind::FogDone { fog, epoch } => {
                    if self.fogs[fog].epoch == epoch {
                        self.on_fog_done(fog)?
                    }
                }
                Kind::CloudArrival { req, cloud } => self.on_cloud_arrival(req, cloud)?,
                Kind::CloudDone { cloud, unit } => self.on_cloud_done(cloud, unit)?,
                Kind::Complete { req } => self.on_complete(req)?,
                Kind::AnnounceTick => self.on_announce(),
                Kind::AnnounceDeliver {
                    to,
                    from,
                    waiting,
                    sent,
                } => {
                    if let Some(e) = self.fogs[to].table.iter_mut().find(|e| e.node_id == from) {
                        e.est_waiting = waiting;
                        e.announced_at = sent;
                    }
                }
            }
        }
        Ok(self.finish())
    }

    fn on_generate(&mut self, iot: usize, rtype: RequestType) -> Result<()> {
        if self.generated >= self.o.n_requests {
            return Ok(());
        }
        let spec = &self.t.iot[iot];
        let rng = &mut self.streams[iot][rtype.index()];
        let u: f64 = rng.random();
        let mean_size = spec.size_mean(rtype);
        let size_bits = mean_size * rng.sample::<f64, _>(Exp1);
        let response_bits = mean_size * rng.sample::<f64, _>(Exp1);
        let work: f64 = rng.sample(Exp1);
        let route = route_from_iot(spec, rtype, self.o.mode, u);
        let req = Request {
            id: self.generated,
            rtype,
            source_iot: iot,
            size_bits,
            response_bits,
            work,
            n_fwd: 0,
            route,
            served_by: None,
            created_at: self.now,
            fog_entry_at: None,
            service_start_at: None,
            completed_at: None,
        };
        self.generated += 1;
        let idx = match self.free.pop() {
            Some(idx) => {
                self.reqs[idx] = req;
                idx
            }
            None => {
                self.reqs.push(req);
                self.reqs.len() - 1
            }
        };
        let now = self.now;
        match route {
            Route::Local => {
                self.reqs[idx].served_by = Some(NodeId::Iot(iot));
                self.reqs[idx].service_start_at = Some(now);
                self.schedule(now + work * spec.local_time(rtype), Kind::Complete { req: idx });
            }
            Route::Fog => {
                let j = spec.fog_assoc.ok_or_else(|| {
                    Error::Parameter(format!("IoT node {iot} routes to fog but has no fog node"))
                })?;
                let arrive = now + self.iot_fog_cost(iot, j)?.delay(size_bits);
                self.reqs[idx].fog_entry_at = Some(arrive);
                self.schedule(arrive, Kind::FogArrival { req: idx, fog: j });
            }
            Route::Cloud => {
                let k = spec.cloud_assoc;
                let arrive = now + self.iot_cloud_cost(iot, k)?.delay(size_bits);
                self.schedule(arrive, Kind::CloudArrival { req: idx, cloud: k });
            }
        }
        self.next_arrival(iot, rtype);
        Ok(())
    }

    fn on_fog_arrival(&mut self, idx: usize, j: usize) -> Result<()> {
        let counting = self.counting();
        let req = self.reqs[idx];
        let ti = req.rtype.index();
        let spec = &self.t.fog[j];
        // A node without neighbours can only keep or spill.
        let e_m = if spec.neighbors.is_empty() { 0 } else { self.t.domain_of_fog(j).e_m };
        let fog = &self.fogs[j];
        let best = best_neighbor(&fog.table).ok();
        let decision = decide(
            req.n_fwd,
            estimate_waiting(&fog.est),
            spec.theta,
            e_m,
            best,
            spec.cloud_assoc,
        )?;
        if counting {
            self.fog_m[j].arrivals[ti] += 1;
        }
        match decision {
            OffloadDecision::Accept => {
                if counting {
                    self.fog_m[j].accepted[ti] += 1;
                }
                self.touch_occupancy(j);
                if self.o.discipline == FogDiscipline::Share {
                    self.share_advance(j);
                }
                let fog = &mut self.fogs[j];
                fog.est = fog.est.with_arrival(req.rtype);
                fog.queue[ti].push_back(FogJob {
                    req: idx,
                    accepted_at: self.now,
                    remaining: None,
                });
                let in_system = fog.est.c_light + fog.est.c_heavy;
                if in_system > self.o.queue_cap as u64 {
                    return Err(Error::Unstable {
                        node: NodeId::Fog(j),
                        detail: format!("{in_system} requests in system exceed the cap of {}", self.o.queue_cap),
                    });
                }
                self.start_fog_service(j)?;
            }
            OffloadDecision::OffloadToFog(to) => {
                if counting {
                    self.fog_m[j].offloaded[ti] += 1;
                    self.fog_m[j].offloads_by_hop[req.n_fwd as usize] += 1;
                }
                self.reqs[idx].n_fwd += 1;
                let at = self.now + self.cost(NodeId::Fog(j), NodeId::Fog(to))?.delay(req.size_bits);
                self.schedule(at, Kind::FogArrival { req: idx, fog: to });
            }
            OffloadDecision::OffloadToCloud(k) => {
                if counting {
                    self.fog_m[j].spilled[ti] += 1;
                }
                let at = self.now + self.cost(NodeId::Fog(j), NodeId::Cloud(k))?.delay(req.size_bits);
                self.schedule(at, Kind::CloudArrival { req: idx, cloud: k });
            }
        }
        Ok(())
    }

    fn start_fog_service(&mut self, j: usize) -> Result<()> {
        if self.o.discipline == FogDiscipline::Share {
            self.share_schedule(j);
            return Ok(());
        }
        let fog = &self.fogs[j];
        let (nl, nh) = (fog.queue[0].len() as u64, fog.queue[1].len() as u64);
        if fog.busy.is_some() || nl + nh == 0 {
            return Ok(());
        }
        let q = self.t.domain_of_fog(j).q;
        let u: f64 = self.sched.random();
        let rtype = select_next_job(nl, nh, q, u)?;
        let fog = &mut self.fogs[j];
        let job = fog.queue[rtype.index()].pop_front().expect("class is nonempty");
        let req = &mut self.reqs[job.req];
        req.service_start_at.get_or_insert(self.now);
        let done = self.now + job.remaining.unwrap_or(req.work * self.t.fog[j].z(rtype));
        fog.busy = Some((job, done));
        fog.epoch += 1;
        let epoch = fog.epoch;
        self.schedule(done, Kind::FogDone { fog: j, epoch });
        Ok(())
    }

    /// Service speeds of the light and heavy head jobs under sharing.
    fn share_speeds(&self, j: usize) -> [f64; 2] {
        let fog = &self.fogs[j];
        let s = light_share(fog.queue[0].len() as u64, fog.queue[1].len() as u64, self.t.domain_of_fog(j).q);
        [s, 1.0 - s]
    }

    /// Charges the work done since the last update to the head jobs.
    fn share_advance(&mut self, j: usize) {
        let speeds = self.share_speeds(j);
        let now = self.now;
        let spec = &self.t.fog[j];
        let fog = &mut self.fogs[j];
        let dt = now - fog.shared_at;
        fog.shared_at = now;
        for (ti, rtype) in [RequestType::Light, RequestType::Heavy].into_iter().enumerate() {
            if let Some(job) = fog.queue[ti].front_mut() {
                let left = job.remaining.unwrap_or(self.reqs[job.req].work * spec.z(rtype));
                job.remaining = Some((left - dt * speeds[ti]).max(0.0));
            }
        }
    }

    /// Schedules the next completion under the current speeds.
    fn share_schedule(&mut self, j: usize) {
        let speeds = self.share_speeds(j);
        let now = self.now;
        let spec = &self.t.fog[j];
        let fog = &mut self.fogs[j];
        fog.epoch += 1;
        let mut next = f64::INFINITY;
        for (ti, rtype) in [RequestType::Light, RequestType::Heavy].into_iter().enumerate() {
            if let Some(job) = fog.queue[ti].front_mut() {
                let req = &mut self.reqs[job.req];
                req.service_start_at.get_or_insert(now);
                let left = *job.remaining.get_or_insert(req.work * spec.z(rtype));
                if speeds[ti] > 0.0 {
                    next = next.min(now + left / speeds[ti]);
                }
            }
        }
        if next.is_finite() {
            let epoch = fog.epoch;
            self.schedule(next, Kind::FogDone { fog: j, epoch });
        }
    }

    /// Removes the head job that has just finished its work.
    fn share_finish(&mut self, j: usize) -> FogJob {
        self.share_advance(j);
        let speeds = self.share_speeds(j);
        let fog = &mut self.fogs[j];
        // The due job is the one with the least time left at its speed.
        let left = |ti: usize| match fog.queue[ti].front() {
            Some(job) if speeds[ti] > 0.0 => job.remaining.unwrap_or(0.0) / speeds[ti],
            _ => f64::INFINITY,
        };
        let ti = if left(0) <= left(1) { 0 } else { 1 };
        fog.queue[ti].pop_front().expect("due class is nonempty")
    }

    fn on_fog_done(&mut self, j: usize) -> Result<()> {
        let FogJob { req: idx, accepted_at, .. } = match self.o.discipline {
            FogDiscipline::NonPreemptive => self.fogs[j].busy.take().expect("fog completion without a job").0,
            FogDiscipline::Share => self.share_finish(j),
        };
        let req = self.reqs[idx];
        let ti = req.rtype.index();
        self.touch_occupancy(j);
        let measured = req.work * self.t.fog[j].z(req.rtype);
        let fog = &mut self.fogs[j];
        if measured > 0.0 {
            fog.est = update_estimate(fog.est, req.rtype, measured)?;
        }
        fog.est = fog.est.with_departure(req.rtype);
        if self.counting() {
            self.fog_m[j].sojourn[ti].push(self.now - accepted_at);
        }
        self.reqs[idx].served_by = Some(NodeId::Fog(j));
        let back = self.cost(NodeId::Fog(j), NodeId::Iot(req.source_iot))?;
        self.schedule(self.now + back.delay(req.response_bits), Kind::Complete { req: idx });
        self.start_fog_service(j)
    }

    fn on_cloud_arrival(&mut self, idx: usize, k: usize) -> Result<()> {
        let m = self.clouds[k].len();
        let unit = self.sched.random_range(0..m);
        let u = &mut self.clouds[k][unit];
        u.queue.push_back((idx, self.now));
        if u.queue.len() > self.o.queue_cap {
            return Err(Error::Unstable {
                node: NodeId::Cloud(k),
                detail: format!("unit {unit} queue exceeds the cap of {}", self.o.queue_cap),
            });
        }
        self.start_cloud_service(k, unit);
        Ok(())
    }

    fn start_cloud_service(&mut self, k: usize, unit: usize) {
        let u = &mut self.clouds[k][unit];
        if u.busy.is_some() {
            return;
        }
        let Some((idx, arrived)) = u.queue.pop_front() else {
            return;
        };
        u.busy = Some((idx, arrived));
        let req = &mut self.reqs[idx];
        req.service_start_at = Some(self.now);
        let done = self.now + req.work * self.t.cloud[k].z(req.rtype);
        self.schedule(done, Kind::CloudDone { cloud: k, unit });
    }

    fn on_cloud_done(&mut self, k: usize, unit: usize) -> Result<()> {
        let (idx, arrived) = self.clouds[k][unit].busy.take().expect("cloud completion without a job");
        let req = self.reqs[idx];
        if self.counting() {
            self.cloud_m[k][req.rtype.index()].push(self.now - arrived);
        }
        self.reqs[idx].served_by = Some(NodeId::Cloud(k));
        let back = self.iot_cloud_cost(req.source_iot, k)?;
        self.schedule(self.now + back.delay(req.response_bits), Kind::Complete { req: idx });
        self.start_cloud_service(k, unit);
        Ok(())
    }

    fn on_complete(&mut self, idx: usize) -> Result<()> {
        let now = self.now;
        let delay = complete_request(&mut self.reqs[idx], now)?;
        let req = self.reqs[idx];
        let counting = self.counting();
        self.completed += 1;
        if counting {
            let ti = req.rtype.index();
            self.samples[ti].push(delay);
            self.samples_all.push(delay);
            let ri = match req.route {
                Route::Local => 0,
                Route::Fog => 1,
                Route::Cloud => 2,
            };
            self.routes[ti][ri] += 1;
            if let Some(entry) = req.fog_entry_at {
                self.fog_layer[ti].push(now - entry);
            }
        }
        let hops = req.n_fwd as usize;
        if hops >= self.n_fwd_hist.len() {
            self.n_fwd_hist.resize(hops + 1, 0);
        }
        self.n_fwd_hist[hops] += 1;
        if self.o.trace {
            self.trace.push(TraceRecord {
                id: req.id,
                rtype: req.rtype,
                route: req.route,
                n_fwd: req.n_fwd,
                created_ms: req.created_at,
                completed_ms: now,
                delay_ms: delay,
            });
        }
        self.free.push(idx);
        Ok(())
    }

    fn on_announce(&mut self) {
        let now = self.now;
        for j in 0..self.fogs.len() {
            let waiting = estimate_waiting(&self.fogs[j].est);
            for e in 0..self.fogs[j].table.len() {
                let to = self.fogs[j].table[e].node_id;
                let delay = self.fogs[j].table[e].rtt / 2.0;
                self.schedule(
                    now + delay,
                    Kind::AnnounceDeliver {
                        to,
                        from: j,
                        waiting,
                        sent: now,
                    },
                );
            }
        }
        self.schedule(now + self.o.announce_period, Kind::AnnounceTick);
    }

    fn finish(self) -> Metrics {
        let [light, heavy] = self.samples;
        let occupancy = self.occupancy.map(|(o, _)| o);
        Metrics {
            mode: self.o.mode,
            seed: self.o.seed,
            n_requests: self.o.n_requests,
            generated: self.generated,
            completed: self.completed,
            warmup: self.warmup,
            end_time: self.now,
            delay: [DelayStats::from_samples(light), DelayStats::from_samples(heavy)],
            delay_all: DelayStats::from_samples(self.samples_all),
            fog_layer_delay: self.fog_layer,
            routes: self.routes,
            n_fwd_hist: self.n_fwd_hist,
            fog: self.fog_m,
            cloud_sojourn: self.cloud_m,
            occupancy,
            trace: self.trace,
        }
    }
}

/// Simulates until `opts.n_requests` generated requests have all completed.
pub fn run(topology: &Topology, opts: &SimOptions) -> Result<Metrics> {
    Engine::new(topology, opts)?.run()
}
