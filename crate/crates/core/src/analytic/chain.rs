//! Steady state of the two-class fog chain.
//!
//! States are `(n, n2)`: Light and Heavy requests in the node. Arrivals raise
//! either count at rates `lambda` and `lambda2`; a Light request leaves at
//! rate `Q mu` and a Heavy one at rate `(1 - Q) mu2`, where `Q` is the
//! fairness share. The lattice is truncated separately in each dimension and
//! solved exactly by linear level reduction over the larger dimension, with
//! the smaller one as the phase block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::policy::light_share;

/// Solver limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    /// Bound on the extrapolated probability mass beyond the truncation.
    pub tol: f64,
    /// Initial truncation bounds (Light, Heavy).
    pub start: (usize, usize),
    /// Largest phase block accepted.
    pub max_phase: usize,
    /// Largest number of stored block entries (levels times phase squared).
    pub max_entries: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            start: (32, 32),
            max_phase: 512,
            max_entries: 40_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Largest Light count kept.
    pub n_max_light: usize,
    /// Largest Heavy count kept.
    pub n_max_heavy: usize,
    /// Row-major over Light count: `probs[n * (n_max_heavy + 1) + n2]`.
    pub probs: Vec<f64>,
    /// Extrapolated mass beyond the truncation bounds.
    pub tail_mass: f64,
    /// Largest global-balance residual over the truncated states.
    pub residual: f64,
}

impl SteadyState {
    pub fn get(&self, n: usize, n2: usize) -> f64 {
        if n > self.n_max_light || n2 > self.n_max_heavy {
            0.0
        } else {
            self.probs[n * (self.n_max_heavy + 1) + n2]
        }
    }

    /// A state holding all mass at `(n, n2)`; useful for checks.
    pub fn point_mass(n: usize, n2: usize) -> Self {
        let mut probs = vec![0.0; (n + 1) * (n2 + 1)];
        probs[n * (n2 + 1) + n2] = 1.0;
        Self {
            n_max_light: n,
            n_max_heavy: n2,
            probs,
            tail_mass: 0.0,
            residual: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean Light and Heavy counts.
    pub fn mean_counts(&self) -> (f64, f64) {
        let w = self.n_max_heavy + 1;
        let mut nl = 0.0;
        let mut nh = 0.0;
        for (idx, &p) in self.probs.iter().enumerate() {
            nl += (idx / w) as f64 * p;
            nh += (idx % w) as f64 * p;
        }
        (nl, nh)
    }

    /// Marginal distribution of the Light count.
    pub fn light_marginal(&self) -> Vec<f64> {
        self.probs.chunks(self.n_max_heavy + 1).map(|r| r.iter().sum()).collect()
    }

    /// Marginal distribution of the Heavy count.
    pub fn heavy_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_max_heavy + 1];
        for row in self.probs.chunks(self.n_max_heavy + 1) {
            for (a, &p) in m.iter_mut().zip(row) {
                *a += p;
            }
        }
        m
    }
}

/// Mean backlog `sum (n / mu + n2 / mu2) P(n, n2)` (ms).
pub fn mean_wait(ss: &SteadyState, mu_light: f64, mu_heavy: f64) -> f64 {
    let w = ss.n_max_heavy + 1;
    ss.probs
        .iter()
        .enumerate()
        .map(|(idx, &p)| ((idx / w) as f64 / mu_light + (idx % w) as f64 / mu_heavy) * p)
        .sum()
}

#[derive(Clone, Copy)]
struct Rates {
    lambda: f64,
    lambda2: f64,
    mu: f64,
    mu2: f64,
    q: f64,
}

impl Rates {
    fn light_down(&self, n: usize, n2: usize) -> f64 {
        light_share(n as u64, n2 as u64, self.q) * self.mu
    }

    fn heavy_down(&self, n: usize, n2: usize) -> f64 {
        if n2 == 0 {
            0.0
        } else {
            (1.0 - light_share(n as u64, n2 as u64, self.q)) * self.mu2
        }
    }
}

/// Estimated mass beyond the truncation of a marginal: the mass of its
/// outer eighth plus a geometric extrapolation whose ratio is read just
/// inside that band, where the truncation does not distort the decay. A
/// band that carries no more than roundoff counts as converged.
fn tail_estimate(marginal: &[f64], tol: f64) -> f64 {
    let k = marginal.len();
    if k < 2 {
        return 0.0;
    }
    let band = (k / 8).max(1);
    let edge: f64 = marginal[k - band..].iter().sum();
    if edge <= 1e-3 * tol {
        return edge;
    }
    let i = k - band;
    if i < 2 {
        return f64::INFINITY;
    }
    let (a, b) = (marginal[i - 2], marginal[i - 1]);
    let r = if a > 0.0 { b / a } else { 1.0 };
    if r >= 1.0 {
        f64::INFINITY
    } else {
        edge + marginal[k - 1] * r / (1.0 - r)
    }
}

/// Solves the truncated chain for fixed bounds.
fn solve_truncated(r: &Rates, nl: usize, nh: usize) -> Result<SteadyState> {
    // Levels run over the larger dimension.
    let light_levels = nl >= nh;
    let (levels, phases) = if light_levels { (nl, nh) } else { (nh, nl) };
    let m = phases + 1;
    let (a_up, b_up) = if light_levels {
        (r.lambda, r.lambda2)
    } else {
        (r.lambda2, r.lambda)
    };
    let state = |l: usize, p: usize| if light_levels { (l, p) } else { (p, l) };
    let down_level = |l: usize, p: usize| {
        let (n, n2) = state(l, p);
        if light_levels {
            r.light_down(n, n2)
        } else {
            r.heavy_down(n, n2)
        }
    };
    let down_phase = |l: usize, p: usize| {
        let (n, n2) = state(l, p);
        if light_levels {
            r.heavy_down(n, n2)
        } else {
            r.light_down(n, n2)
        }
    };
    let local = |l: usize| {
        let mut a = DMatrix::<f64>::zeros(m, m);
        for p in 0..m {
            let mut out = down_level(l, p);
            if l < levels {
                out += a_up;
            }
            if p < phases {
                a[(p, p + 1)] = b_up;
                out += b_up;
            }
            if p > 0 {
                let d = down_phase(l, p);
                a[(p, p - 1)] = d;
                out += d;
            }
            a[(p, p)] = -out;
        }
        a
    };

    // r_mats[l] maps level l to level l + 1.
    let mut r_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); levels];
    let mut u = local(levels);
    for l in (0..levels).rev() {
        let neg = -&u;
        let inv = neg.lu().try_inverse().ok_or_else(|| Error::Numeric {
            message: format!("singular block at level {}", l + 1),
            residual: f64::NAN,
        })?;
        let rl = inv * a_up;
        // U_l = A1(l) + R_l A2(l + 1), with A2 diagonal.
        let mut next = local(l);
        for c in 0..m {
            let d = down_level(l + 1, c);
            if d != 0.0 {
                for row in 0..m {
                    next[(row, c)] += rl[(row, c)] * d;
                }
            }
        }
        r_mats[l] = rl;
        u = next;
    }

    // pi_0 U_0 = 0: solve U_0^T x = 0 with the first equation replaced by a
    // scale fix.
    let mut sys = u.transpose();
    let mut rhs = DVector::<f64>::zeros(m);
    for c in 0..m {
        sys[(0, c)] = 1.0;
    }
    rhs[0] = 1.0;
    let pi0 = sys.lu().solve(&rhs).ok_or_else(|| Error::Numeric {
        message: "singular boundary system".into(),
        residual: f64::NAN,
    })?;

    let mut level_probs: Vec<DVector<f64>> = Vec::with_capacity(levels + 1);
    level_probs.push(pi0);
    for rl in &r_mats {
        let prev = level_probs.last().expect("level 0 present");
        level_probs.push(rl.tr_mul(prev));
    }
    drop(r_mats);

    let w = nh + 1;
    let mut probs = vec![0.0; (nl + 1) * w];
    for (l, v) in level_probs.iter().enumerate() {
        for p in 0..m {
            let (n, n2) = state(l, p);
            probs[n * w + n2] = v[p].max(0.0);
        }
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numeric {
            message: "steady state does not normalize".into(),
            residual: f64::NAN,
        });
    }
    probs.iter_mut().for_each(|p| *p /= total);

    let mut ss = SteadyState {
        n_max_light: nl,
        n_max_heavy: nh,
        probs,
        tail_mass: 0.0,
        residual: 0.0,
    };
    ss.residual = balance_residual(&ss, r);
    Ok(ss)
}

/// Largest absolute global-balance defect of the truncated chain.
fn balance_residual(ss: &SteadyState, r: &Rates) -> f64 {
    let (nl, nh) = (ss.n_max_light, ss.n_max_heavy);
    let mut worst = 0.0f64;
    for n in 0..=nl {
        for n2 in 0..=nh {
            let p = ss.get(n, n2);
            let mut out = r.light_down(n, n2) + r.heavy_down(n, n2);
            if n < nl {
                out += r.lambda;
            }
            if n2 < nh {
                out += r.lambda2;
            }
            let mut inflow = 0.0;
            if n > 0 {
                inflow += ss.get(n - 1, n2) * r.lambda;
            }
            if n2 > 0 {
                inflow += ss.get(n, n2 - 1) * r.lambda2;
            }
            if n < nl {
                inflow += ss.get(n + 1, n2) * r.light_down(n + 1, n2);
            }
            if n2 < nh {
                inflow += ss.get(n, n2 + 1) * r.heavy_down(n, n2 + 1);
            }
            worst = worst.max((inflow - p * out).abs());
        }
    }
    worst
}

/// Stationary distribution of one fog node's chain.
pub fn solve_chain(
    lambda_light: f64,
    lambda_heavy: f64,
    mu_light: f64,
    mu_heavy: f64,
    q: f64,
    tol: f64,
) -> Result<SteadyState> {
    solve_chain_with(
        lambda_light,
        lambda_heavy,
        mu_light,
        mu_heavy,
        q,
        &ChainOptions {
            tol,
            ..ChainOptions::default()
        },
    )
}

pub fn solve_chain_with(
    lambda_light: f64,
    lambda_heavy: f64,
    mu_light: f64,
    mu_heavy: f64,
    q: f64,
    opts: &ChainOptions,
) -> Result<SteadyState> {
    for (name, v) in [("lambda_light", lambda_light), ("lambda_heavy", lambda_heavy)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be nonnegative, got {v}")));
        }
    }
    if lambda_light > 0.0 && !(mu_light > 0.0) || lambda_heavy > 0.0 && !(mu_heavy > 0.0) {
        return Err(Error::Parameter("service rates must be positive".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Parameter(format!("q must lie in (0,1), got {q}")));
    }
    let rho = if lambda_light > 0.0 { lambda_light / mu_light } else { 0.0 }
        + if lambda_heavy > 0.0 { lambda_heavy / mu_heavy } else { 0.0 };
    if rho >= 1.0 {
        return Err(Error::Overload { rho });
    }
    let r = Rates {
        lambda: lambda_light,
        lambda2: lambda_heavy,
        mu: mu_light,
        mu2: mu_heavy,
        q,
    };
    // A class without arrivals never leaves count zero.
    let mut nl = if lambda_light > 0.0 { opts.start.0.max(2) } else { 0 };
    let mut nh = if lambda_heavy > 0.0 { opts.start.1.max(2) } else { 0 };
    loop {
        let (levels, phases) = (nl.max(nh), nl.min(nh));
        if phases + 1 > opts.max_phase || (levels + 1) * (phases + 1).pow(2) > opts.max_entries {
            return Err(Error::Numeric {
                message: format!(
                    "truncation {nl}x{nh} exceeds solver limits (offered load {rho:.6})"
                ),
                residual: f64::NAN,
            });
        }
        let mut ss = solve_truncated(&r, nl, nh)?;
        let tail_l = if nl > 0 { tail_estimate(&ss.light_marginal(), opts.tol) } else { 0.0 };
        let tail_h = if nh > 0 { tail_estimate(&ss.heavy_marginal(), opts.tol) } else { 0.0 };
        let grow_l = tail_l >= opts.tol / 2.0;
        let grow_h = tail_h >= opts.tol / 2.0;
        if !grow_l && !grow_h {
            ss.tail_mass = tail_l + tail_h;
            return Ok(ss);
        }
        if grow_l {
            nl *= 2;
        }
        if grow_h {
            nh *= 2;
        }
    }
}
