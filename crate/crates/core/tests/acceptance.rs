//! Acceptance suite. Every criterion prints one PASS or FAIL line; the
//! process fails if any criterion does.

mod common;

use std::process::Command;
use std::time::Instant;

use common::{build, desk, spearman};
use fogsim::analytic::{analyze, cloud_wait, mean_wait, acceptance_prob, solve_chain, solve_flows, AnalyticOptions, FlowOptions, SteadyState};
use fogsim::model::{presets, CloudSpec, PolicyMode, RequestType};
use fogsim::sim::{run, Metrics, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

const N: u64 = 1_000_000;
const TYPES: [RequestType; 2] = [RequestType::Light, RequestType::Heavy];

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id:<28} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn simulate(c: &fogsim::model::ScenarioConfig, mode: PolicyMode, seed: u64) -> Metrics {
    run(&build(c), &SimOptions::from_config(c, mode, N, seed)).expect("simulation runs")
}

fn mm1_chain(r: &mut Report) {
    let start = Instant::now();
    let mu = 1.0;
    let mut err: f64 = 0.0;
    let mut wait_err: f64 = 0.0;
    for rho in [0.1, 0.5, 0.9] {
        let ss = solve_chain(rho * mu, 0.0, mu, 0.5, 0.5, 1e-10).unwrap();
        for n in 0..=ss.n_max_light {
            err = err.max((ss.get(n, 0) - (1.0 - rho) * rho.powi(n as i32)).abs());
        }
        let w = mean_wait(&ss, mu, 0.5);
        wait_err = wait_err.max((w - rho / (mu * (1.0 - rho))).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "mm1-geometric",
        err < 1e-8 && secs < 1.0,
        format!("max |P(n,0) - (1-rho)rho^n| = {err:.2e} (< 1e-8), {secs:.3} s (< 1 s)"),
    );
    r.check("mm1-mean-wait", wait_err < 1e-8, format!("max error {wait_err:.2e} (< 1e-8)"));
}

fn cloud_reduction(r: &mut Report) {
    let mut err: f64 = 0.0;
    for (m, z, lambda) in [(1, 2.0, 0.3), (4, 0.5, 6.0), (6, 0.02, 100.0)] {
        let c = CloudSpec { id: 0, m, z_light: z, z_heavy: 5.0 * z };
        let exact = 1.0 / (1.0 / z - lambda / m as f64);
        err = err.max((cloud_wait(lambda, 0.0, &c).unwrap() - exact).abs());
    }
    r.check("cloud-mm1-reduction", err < 1e-12, format!("max error {err:.2e} (< 1e-12)"));
}

/// Draws states from the steady state and the backlog of each state, and
/// counts how often it stays below the threshold.
fn sampled_acceptance(ss: &SteadyState, mu: f64, mu2: f64, theta: f64, samples: usize, seed: u64) -> f64 {
    let mut cdf = Vec::with_capacity(ss.probs.len());
    let mut acc = 0.0;
    for p in &ss.probs {
        acc += p;
        cdf.push(acc);
    }
    let w = ss.n_max_heavy + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let (n, n2) = (idx / w, idx % w);
        let mut backlog = 0.0;
        if n > 0 {
            backlog += Gamma::new(n as f64, 1.0 / mu).unwrap().sample(&mut rng);
        }
        if n2 > 0 {
            backlog += Gamma::new(n2 as f64, 1.0 / mu2).unwrap().sample(&mut rng);
        }
        if n + n2 == 0 || backlog < theta {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

fn acceptance_monte_carlo(r: &mut Report) {
    let tuples = [
        (0.3, 0.1, 1.0, 0.5, 2.0),
        (0.5, 0.05, 2.0, 0.25, 4.0),
        (0.2, 0.2, 1.0, 1.0, 1.5),
        (0.05, 0.3, 0.5, 0.4, 6.0),
        (0.6, 0.02, 1.5, 0.2, 0.8),
    ];
    let mut worst: f64 = 0.0;
    for (k, &(l, l2, mu, mu2, theta)) in tuples.iter().enumerate() {
        let ss = solve_chain(l, l2, mu, mu2, 0.5, 1e-10).unwrap();
        let exact = acceptance_prob(&ss, mu, mu2, theta);
        let mc = sampled_acceptance(&ss, mu, mu2, theta, 1_000_000, 100 + k as u64);
        worst = worst.max((exact - mc).abs());
    }
    r.check("acceptance-monte-carlo", worst < 0.005, format!("max |delta| {worst:.4} over 5 tuples (< 0.005)"));
}

fn sim_vs_analytic(r: &mut Report) {
    let start = Instant::now();
    let c = desk("setting2");
    let t = build(&c);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    let mut conserving = true;
    for mode in PolicyMode::ALL {
        let a = analyze(&t, mode, &AnalyticOptions::default()).unwrap();
        let m = simulate(&c, mode, 1);
        conserving &= m.generated == N && m.completed == N && m.max_n_fwd() <= c.domain.e_m;
        for ty in TYPES {
            let d = m.delay_stats(Some(ty));
            let anl = a.mean_delay(Some(ty));
            let rel = (anl / d.mean - 1.0).abs();
            worst = worst.max(rel);
            lines.push(format!("{mode}/{ty} sim {:.2}±{:.2} anl {:.2}", d.mean, d.ci95, anl));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "sim-vs-analytic",
        worst < 0.10 && secs < 300.0,
        format!("max rel. error {:.1}% (< 10%), {secs:.0} s; {}", 100.0 * worst, lines.join("; ")),
    );
    r.check("sim-conservation", conserving, "generated = completed = n, n_fwd <= e_M".into());
}

fn mode_ordering(r: &mut Report) {
    let mut ok = true;
    let mut worst_gap = f64::INFINITY;
    for k in 1..=9 {
        let mut c = desk("setting3");
        c.iot.b = k as f64 / 10.0;
        let d: Vec<_> = PolicyMode::ALL.iter().map(|&m| simulate(&c, m, 1).delay_all.clone()).collect();
        let (afp, lfp, nfp) = (&d[0], &d[1], &d[2]);
        let gap = nfp.mean - afp.mean - (afp.ci95 + nfp.ci95);
        ok &= afp.mean <= lfp.mean && lfp.mean <= nfp.mean && gap > 0.0;
        worst_gap = worst_gap.min(gap);
    }
    r.check(
        "mode-ordering",
        ok,
        format!("AFP <= LFP <= NFP for b = 0.1..0.9; min (NFP - AFP) beyond CI {worst_gap:.2} ms"),
    );
}

/// One-sided exact permutation p-value of a Spearman correlation at least
/// as extreme as `rho` in the direction of its sign.
fn spearman_p(x: &[f64], rho: f64) -> f64 {
    fn permute(v: &mut Vec<f64>, k: usize, x: &[f64], rho: f64, hits: &mut u64, total: &mut u64) {
        if k == v.len() {
            *total += 1;
            let r = spearman(x, v);
            if (rho >= 0.0 && r >= rho - 1e-12) || (rho < 0.0 && r <= rho + 1e-12) {
                *hits += 1;
            }
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, x, rho, hits, total);
            v.swap(k, i);
        }
    }
    let mut v: Vec<f64> = (0..x.len()).map(|i| i as f64).collect();
    let (mut hits, mut total) = (0, 0);
    permute(&mut v, 0, x, rho, &mut hits, &mut total);
    hits as f64 / total as f64
}

fn fairness_trend(r: &mut Report) {
    let qs: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut light = Vec::new();
    let mut heavy = Vec::new();
    for &q in &qs {
        let mut c = desk("setting1");
        c.domain.q = q;
        let m = simulate(&c, PolicyMode::Afp, 1);
        light.push(m.delay[0].clone());
        heavy.push(m.delay[1].clone());
    }
    let lm: Vec<f64> = light.iter().map(|d| d.mean).collect();
    let hm: Vec<f64> = heavy.iter().map(|d| d.mean).collect();
    let (rl, rh) = (spearman(&qs, &lm), spearman(&qs, &hm));
    let (pl, ph) = (spearman_p(&qs, rl), spearman_p(&qs, rh));
    // Steps against the trend must stay inside the joint CI.
    let noise_ok = (1..qs.len()).all(|i| {
        lm[i] - lm[i - 1] <= light[i].ci95 + light[i - 1].ci95
            && hm[i - 1] - hm[i] <= heavy[i].ci95 + heavy[i - 1].ci95
    });
    r.check(
        "fairness-trend",
        rl < 0.0 && pl < 0.05 && rh > 0.0 && ph < 0.05 && noise_ok,
        format!(
            "Light rho {rl:.3} (p {pl:.4}) {:.1} -> {:.1} ms; Heavy rho {rh:.3} (p {ph:.4}) {:.1} -> {:.1} ms",
            lm[0], lm[8], hm[0], hm[8]
        ),
    );
}

fn forwarding_boundary(r: &mut Report) {
    let mut c = desk("setting2");
    c.domain.e_m = 0;
    let a = analyze(&build(&c), PolicyMode::Afp, &AnalyticOptions::default()).unwrap();
    let m = simulate(&c, PolicyMode::Afp, 1);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for ty in TYPES {
        let sim = m.fog_layer_delay[ty.index()].mean;
        let anl = a.delays.mean_fog_layer(Some(ty));
        worst = worst.max((anl / sim - 1.0).abs());
        parts.push(format!("{ty} sim {sim:.2} anl {anl:.2}"));
    }
    r.check(
        "no-forwarding-boundary",
        worst < 0.10,
        format!("fog-layer delay max rel. error {:.1}% (< 10%); {}", 100.0 * worst, parts.join("; ")),
    );

    let runs: Vec<_> = (0..=5)
        .map(|e| {
            let mut c = desk("setting2");
            c.domain.e_m = e;
            simulate(&c, PolicyMode::Lfp, 1).delay_all.clone()
        })
        .collect();
    let ok = runs.iter().all(|d| (d.mean - runs[0].mean).abs() <= d.ci95 + runs[0].ci95);
    let spread = runs.iter().map(|d| d.mean).fold(f64::NEG_INFINITY, f64::max)
        - runs.iter().map(|d| d.mean).fold(f64::INFINITY, f64::min);
    r.check(
        "lfp-forwarding-invariance",
        ok,
        format!("LFP delay spread {spread:.3} ms over e_M = 0..5 (CI ±{:.3})", runs[0].ci95),
    );
}

fn flow_conservation(r: &mut Report) {
    let mut worst: f64 = 0.0;
    for name in ["setting2", "setting4", "setting5"] {
        for e_m in [0, 1, 3] {
            let mut c = desk(name);
            c.domain.e_m = e_m;
            let t = build(&c);
            for mode in PolicyMode::ALL {
                let f = solve_flows(&t, mode, &FlowOptions::default()).unwrap();
                for ti in 0..2 {
                    let inflow: f64 = f.fogs.iter().map(|j| j.iot_inflow[ti]).sum();
                    let absorbed: f64 = f.fogs.iter().map(|j| j.lambda[ti] + j.cloud_spill[ti]).sum();
                    worst = worst.max((inflow - absorbed).abs());
                }
            }
        }
    }
    r.check("flow-absorption", worst <= 1e-9, format!("max |sum I - sum accepted - sum C| {worst:.2e} (<= 1e-9)"));
}

fn determinism(r: &mut Report) {
    let bin = env!("CARGO_BIN_EXE_fogsim");
    let desk_args = ["--set", "n_iot=40", "--set", "n_fog=5", "--set", "n_cloud=1", "--set", "avg_degree=2"];
    let out = |args: &[&str], threads: &str| {
        Command::new(bin)
            .args(args)
            .args(desk_args)
            .env("FOGSIM_THREADS", threads)
            .output()
            .expect("binary runs")
    };
    let sim = ["simulate", "--config", "setting2", "--requests", "50000", "--seed", "17"];
    let a = out(&sim, "1");
    let b = out(&sim, "1");
    let sweep = [
        "sweep", "--config", "setting2", "--sweep", "q=0.2,0.5,0.8", "--engine", "both", "--reps", "2", "--requests",
        "20000",
    ];
    let s1 = out(&sweep, "1");
    let s4 = out(&sweep, "4");
    let ok = a.status.success() && s1.status.success() && a.stdout == b.stdout && s1.stdout == s4.stdout;
    r.check(
        "determinism",
        ok,
        format!("repeated run identical {}, 1 vs 4 threads identical {}", a.stdout == b.stdout, s1.stdout == s4.stdout),
    );
}

fn fog_share_anchor(r: &mut Report) {
    let mut light = Vec::new();
    let mut heavy = Vec::new();
    for k in 0..=4 {
        let mut c = presets::preset("setting4").unwrap();
        c.iot.p_fog = 0.2 * k as f64;
        let m = simulate(&c, PolicyMode::Afp, 1);
        light.push(m.delay[0].mean);
        heavy.push(m.delay[1].mean);
    }
    let factor = light[0] / light[4];
    let monotone = heavy.windows(2).all(|w| w[1] < w[0]);
    r.check(
        "fog-share-anchor",
        factor >= 2.5 && monotone,
        format!(
            "Light {:.1} -> {:.1} ms (x{factor:.2}, >= 2.5); Heavy {} ms",
            light[0],
            light[4],
            heavy.iter().map(|h| format!("{h:.1}")).collect::<Vec<_>>().join(" > ")
        ),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    let start = Instant::now();
    mm1_chain(&mut r);
    cloud_reduction(&mut r);
    acceptance_monte_carlo(&mut r);
    sim_vs_analytic(&mut r);
    mode_ordering(&mut r);
    fairness_trend(&mut r);
    forwarding_boundary(&mut r);
    flow_conservation(&mut r);
    determinism(&mut r);
    fog_share_anchor(&mut r);
    println!("acceptance: {} failed, {:.0} s", r.failed, start.elapsed().as_secs_f64());
    if r.failed > 0 {
        std::process::exit(1);
    }
}
