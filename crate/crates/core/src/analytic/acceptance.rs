//! Probability that a fog node's backlog is below its threshold.
//!
//! The backlog in state `(n, n2)` is the sum of `n` Exp(mu) and `n2`
//! Exp(mu2) processing times, i.e. Erlang(n, mu) + Erlang(n2, mu2). Mixed
//! states go through one numerical integral over the weighted sum of all of
//! them, so the cost is one quadrature per call rather than one per state.

use super::chain::SteadyState;

const QUAD_TOL: f64 = 1e-8;
const MAX_SPLIT_DEPTH: u32 = 12;
/// Erlang densities below this (relative to the rate) contribute less than
/// the quadrature tolerance over any threshold in use.
const NEGLIGIBLE_DENSITY: f64 = 1e-20;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(0.0);
    for k in 1..=n {
        t.push(t[k - 1] + (k as f64).ln());
    }
    t
}

/// Poisson(`mx`) probabilities of 0..`k_max`, computed in log space.
fn poisson_pmfs(mx: f64, k_max: usize, lf: &[f64]) -> Vec<f64> {
    if mx == 0.0 {
        let mut v = vec![0.0; k_max + 1];
        v[0] = 1.0;
        return v;
    }
    let lx = mx.ln();
    (0..=k_max)
        .map(|k| (-mx + k as f64 * lx - lf[k]).exp())
        .collect()
}

/// `out[n] = P[Erlang(n, mu) <= x]` for `n` in 0..=`n_max`.
pub fn erlang_cdfs(mu: f64, x: f64, n_max: usize) -> Vec<f64> {
    erlang_cdfs_with(mu, x, n_max, &ln_factorials(n_max))
}

fn erlang_cdfs_with(mu: f64, x: f64, n_max: usize, lf: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; n_max + 1];
    if n_max == 0 {
        return out;
    }
    if x <= 0.0 {
        out[1..].iter_mut().for_each(|v| *v = 0.0);
        return out;
    }
    let pmf = poisson_pmfs(mu * x, n_max - 1, lf);
    let mut below = 0.0;
    for n in 1..=n_max {
        below += pmf[n - 1];
        out[n] = (1.0 - below).max(0.0);
    }
    out
}

/// `out[n] = ` density of Erlang(n, mu) at `t`, for `n` in 0..=`n_max`
/// (`out[0]` is unused and zero).
fn erlang_pdfs_with(mu: f64, t: f64, n_max: usize, lf: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if n_max == 0 || t < 0.0 {
        return out;
    }
    let pmf = poisson_pmfs(mu * t, n_max - 1, lf);
    for n in 1..=n_max {
        out[n] = mu * pmf[n - 1];
    }
    out
}

fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= MAX_SPLIT_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    integrate_adaptive(f, a, mid, tol / 2.0, depth + 1)
        + integrate_adaptive(f, mid, b, tol / 2.0, depth + 1)
}

/// `P[W < theta]` under the steady state `ss`. An empty node always counts
/// as accepting, so `theta = 0` gives `P(0,0)`.
pub fn acceptance_prob(ss: &SteadyState, mu_light: f64, mu_heavy: f64, theta: f64) -> f64 {
    if theta.is_infinite() && theta > 0.0 {
        return 1.0;
    }
    let p00 = ss.get(0, 0);
    if !(theta > 0.0) {
        return p00;
    }
    let (nl, nh) = (ss.n_max_light, ss.n_max_heavy);
    let lf = ln_factorials(nl + nh + 1);
    let fl = erlang_cdfs_with(mu_light, theta, nl, &lf);
    let fh = erlang_cdfs_with(mu_heavy, theta, nh, &lf);

    let mut acc = p00;
    for n in 1..=nl {
        acc += ss.get(n, 0) * fl[n];
    }
    for n2 in 1..=nh {
        acc += ss.get(0, n2) * fh[n2];
    }
    if nl == 0 || nh == 0 {
        return acc.min(1.0);
    }

    let mixed_mass: f64 = (1..=nl)
        .map(|n| (1..=nh).map(|n2| ss.get(n, n2)).sum::<f64>())
        .sum();
    if mixed_mass == 0.0 {
        return acc.min(1.0);
    }

    if (mu_light - mu_heavy).abs() <= 1e-12 * mu_light.max(mu_heavy) {
        let f = erlang_cdfs_with(mu_light, theta, nl + nh, &lf);
        for n in 1..=nl {
            for n2 in 1..=nh {
                acc += ss.get(n, n2) * f[n + n2];
            }
        }
        return acc.min(1.0);
    }

    // int_0^theta sum_{n2} f_{n2}(t) sum_n P(n, n2) F_n(theta - t) dt
    let integrand = |t: f64| {
        let dens = erlang_pdfs_with(mu_heavy, t, nh, &lf);
        let cdf = erlang_cdfs_with(mu_light, theta - t, nl, &lf);
        let mut s = 0.0;
        for n2 in 1..=nh {
            if dens[n2] < NEGLIGIBLE_DENSITY * mu_heavy {
                continue;
            }
            let mut inner = 0.0;
            for n in 1..=nl {
                inner += ss.get(n, n2) * cdf[n];
            }
            s += dens[n2] * inner;
        }
        s
    };
    acc += integrate_adaptive(&integrand, 0.0, theta, QUAD_TOL, 0).clamp(0.0, mixed_mass);
    acc.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::chain::solve_chain;

    #[test]
    fn erlang_cdf_values() {
        let f = erlang_cdfs(1.0, 2.0, 3);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((f[2] - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-15);
        assert!((f[3] - (1.0 - 5.0 * (-2.0f64).exp())).abs() < 1e-15);
        assert_eq!(erlang_cdfs(1.0, 0.0, 2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn limits() {
        let ss = solve_chain(0.3, 0.1, 1.0, 0.5, 0.5, 1e-8).unwrap();
        assert_eq!(acceptance_prob(&ss, 1.0, 0.5, 0.0), ss.get(0, 0));
        assert!((acceptance_prob(&ss, 1.0, 0.5, f64::INFINITY) - 1.0).abs() < 1e-12);
        assert!((acceptance_prob(&ss, 1.0, 0.5, 1e4) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_class_series() {
        let ss = solve_chain(0.5, 0.0, 1.0, 1.0, 0.5, 1e-10).unwrap();
        let f = erlang_cdfs(1.0, 2.0, 80);
        let expected: f64 = 0.5 + (1..=80).map(|n| 0.5f64.powi(n as i32 + 1) * f[n]).sum::<f64>();
        assert!((acceptance_prob(&ss, 1.0, 1.0, 2.0) - expected).abs() < 1e-9);
        // M/M/1 workload: P[W <= x] = 1 - rho exp(-(mu - lambda) x).
        assert!((expected - (1.0 - 0.5 * (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn quadrature_agrees_with_closed_form_near_equal_rates() {
        let ss = solve_chain(0.3, 0.2, 1.0, 1.0, 0.5, 1e-10).unwrap();
        let exact = acceptance_prob(&ss, 1.0, 1.0, 3.0);
        let quad = acceptance_prob(&ss, 1.0, 1.0 + 1e-9, 3.0);
        assert!((exact - quad).abs() < 1e-7, "{exact} vs {quad}");
    }

    #[test]
    fn nondecreasing_in_threshold() {
        let ss = solve_chain(5.0, 0.3, 100.0, 0.5, 0.5, 1e-8).unwrap();
        let mut prev = 0.0;
        for k in 0..40 {
            let p = acceptance_prob(&ss, 100.0, 0.5, k as f64 * 0.5);
            assert!(p >= prev - 1e-9, "{k}: {p} < {prev}");
            prev = p;
        }
    }
}
