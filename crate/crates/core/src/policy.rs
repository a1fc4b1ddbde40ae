//! Fog-node decision logic: waiting-time estimate, admission or offload,
//! best-neighbour choice and IoT-side routing. Everything here is a pure
//! function over small `Copy` values.

use thiserror::Error;

use crate::model::{IotSpec, PolicyMode, RequestType, Route};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("processing-time measurement must be positive, got {0}")]
    NonPositiveMeasurement(f64),
    #[error("forward count {n_fwd} exceeds offload limit {e_m}")]
    ForwardLimitExceeded { n_fwd: u32, e_m: u32 },
    #[error("reachability table is empty")]
    EmptyTable,
    #[error("offload to a fog neighbour required but no neighbour is known")]
    NoNeighbor,
}

/// Per-fog estimate of the time needed to clear its current backlog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingTimeEstimator {
    /// EWMA of Light processing times (ms).
    pub z_light: f64,
    /// EWMA of Heavy processing times (ms).
    pub z_heavy: f64,
    /// Light requests queued or in service.
    pub c_light: u64,
    /// Heavy requests queued or in service.
    pub c_heavy: u64,
    pub alpha: f64,
}

impl WaitingTimeEstimator {
    /// Empty node with the estimates seeded from the configured means.
    pub fn new(z_light: f64, z_heavy: f64, alpha: f64) -> Self {
        Self {
            z_light,
            z_heavy,
            c_light: 0,
            c_heavy: 0,
            alpha,
        }
    }

    pub fn count(&self, rtype: RequestType) -> u64 {
        match rtype {
            RequestType::Light => self.c_light,
            RequestType::Heavy => self.c_heavy,
        }
    }

    pub fn with_arrival(mut self, rtype: RequestType) -> Self {
        match rtype {
            RequestType::Light => self.c_light += 1,
            RequestType::Heavy => self.c_heavy += 1,
        }
        self
    }

    /// Count after a departure; saturates at zero.
    pub fn with_departure(mut self, rtype: RequestType) -> Self {
        match rtype {
            RequestType::Light => self.c_light = self.c_light.saturating_sub(1),
            RequestType::Heavy => self.c_heavy = self.c_heavy.saturating_sub(1),
        }
        self
    }
}

/// `c * z + c' * z'`.
pub fn estimate_waiting(est: &WaitingTimeEstimator) -> f64 {
    est.c_light as f64 * est.z_light + est.c_heavy as f64 * est.z_heavy
}

/// EWMA step for one type: `z = (1 - alpha) z + alpha * measured`.
pub fn update_estimate(
    est: WaitingTimeEstimator,
    rtype: RequestType,
    measured_ms: f64,
) -> Result<WaitingTimeEstimator, PolicyError> {
    if !(measured_ms > 0.0) {
        return Err(PolicyError::NonPositiveMeasurement(measured_ms));
    }
    let blend = |z: f64| (1.0 - est.alpha) * z + est.alpha * measured_ms;
    let mut out = est;
    match rtype {
        RequestType::Light => out.z_light = blend(est.z_light),
        RequestType::Heavy => out.z_heavy = blend(est.z_heavy),
    }
    Ok(out)
}

/// One row of a fog node's reachability table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachabilityEntry {
    pub node_id: usize,
    /// Round-trip delay to the neighbour (ms), fixed at setup.
    pub rtt: f64,
    /// Last announced estimated waiting time (ms).
    pub est_waiting: f64,
    pub announced_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffloadDecision {
    Accept,
    OffloadToFog(usize),
    OffloadToCloud(usize),
}

/// Whether a request offloaded `n_fwd` times must leave the fog layer if
/// rejected (1 in the model's notation).
pub fn forward_limit_reached(n_fwd: u32, e_m: u32) -> Result<bool, PolicyError> {
    if n_fwd > e_m {
        return Err(PolicyError::ForwardLimitExceeded { n_fwd, e_m });
    }
    Ok(n_fwd == e_m)
}

/// Offloading function over the forward count: 0 below the limit, 1 at it.
pub fn phi(x: u32, e_m: u32) -> Result<u8, PolicyError> {
    forward_limit_reached(x, e_m).map(u8::from)
}

/// Admission rule of a fog node. A request is accepted when the estimated
/// waiting time is below the threshold or the node is empty; otherwise it
/// goes to the best neighbour while the offload limit allows, else to the
/// cloud.
pub fn decide(
    n_fwd: u32,
    est_waiting: f64,
    theta: f64,
    e_m: u32,
    best: Option<usize>,
    cloud: usize,
) -> Result<OffloadDecision, PolicyError> {
    let at_limit = forward_limit_reached(n_fwd, e_m)?;
    if est_waiting < theta || est_waiting == 0.0 {
        Ok(OffloadDecision::Accept)
    } else if !at_limit {
        best.map(OffloadDecision::OffloadToFog)
            .ok_or(PolicyError::NoNeighbor)
    } else {
        Ok(OffloadDecision::OffloadToCloud(cloud))
    }
}

/// Probability that the next job served is Light when `n` Light and `n2`
/// Heavy requests are waiting: `q n / (q n + (1 - q) n2)`. Zero when both
/// classes are empty.
pub fn light_share(n: u64, n2: u64, q: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n2 == 0 {
        return 1.0;
    }
    let a = q * n as f64;
    a / (a + (1.0 - q) * n2 as f64)
}

/// Neighbour minimising `est_waiting + rtt / 2`, ties to the lowest id.
pub fn best_neighbor(table: &[ReachabilityEntry]) -> Result<usize, PolicyError> {
    table
        .iter()
        .map(|e| (e.est_waiting + e.rtt / 2.0, e.node_id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or(PolicyError::EmptyTable)
}

/// Destination layer for a new request given a uniform sample `u` in [0,1).
/// Thresholds are taken in the order local, fog, cloud.
pub fn route_from_iot(iot: &IotSpec, rtype: RequestType, mode: PolicyMode, u: f64) -> Route {
    let r = iot.routing(rtype, mode);
    if u < r.p_iot {
        Route::Local
    } else if u < r.p_iot + r.p_fog {
        Route::Fog
    } else {
        Route::Cloud
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(c: u64, z: f64, c2: u64, z2: f64) -> WaitingTimeEstimator {
        WaitingTimeEstimator {
            z_light: z,
            z_heavy: z2,
            c_light: c,
            c_heavy: c2,
            alpha: 0.1,
        }
    }

    fn entry(id: usize, rtt: f64, w: f64) -> ReachabilityEntry {
        ReachabilityEntry {
            node_id: id,
            rtt,
            est_waiting: w,
            announced_at: 0.0,
        }
    }

    fn iot(p_iot: f64, p_fog: f64, p_cloud: f64) -> IotSpec {
        IotSpec {
            id: 0,
            gamma_light: 0.1,
            gamma_heavy: 0.1,
            b: 0.5,
            p_iot,
            p_fog,
            p_cloud,
            a_light: 30.0,
            a_heavy: 400.0,
            size_light_mean: 800.0,
            size_heavy_mean: 655_360.0,
            fog_assoc: Some(0),
            cloud_assoc: 0,
        }
    }

    #[test]
    fn waiting_estimate_examples() {
        assert_eq!(estimate_waiting(&est(2, 5.0, 1, 10.0)), 20.0);
        assert_eq!(estimate_waiting(&est(0, 5.0, 0, 10.0)), 0.0);
        assert_eq!(estimate_waiting(&est(3, 30.0, 0, 10.0)), 90.0);
    }

    #[test]
    fn ewma_examples() {
        let e = est(0, 10.0, 0, 7.0);
        let u = update_estimate(e, RequestType::Light, 20.0).unwrap();
        assert!((u.z_light - 11.0).abs() < 1e-12);
        assert_eq!(u.z_heavy, 7.0);
        let full = WaitingTimeEstimator { alpha: 1.0, ..e };
        assert_eq!(update_estimate(full, RequestType::Heavy, 3.5).unwrap().z_heavy, 3.5);
        let none = WaitingTimeEstimator { alpha: 0.0, ..e };
        assert_eq!(update_estimate(none, RequestType::Light, 99.0).unwrap().z_light, 10.0);
        assert_eq!(
            update_estimate(e, RequestType::Light, 0.0),
            Err(PolicyError::NonPositiveMeasurement(0.0))
        );
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0, 1), Ok(0));
        assert_eq!(phi(1, 1), Ok(1));
        assert_eq!(phi(0, 0), Ok(1));
        assert!(phi(2, 1).is_err());
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0, 0.1, 0.2, 1, Some(4), 0), Ok(OffloadDecision::Accept));
        assert_eq!(decide(0, 0.3, 0.2, 1, Some(4), 0), Ok(OffloadDecision::OffloadToFog(4)));
        assert_eq!(decide(1, 0.3, 0.2, 1, Some(4), 2), Ok(OffloadDecision::OffloadToCloud(2)));
        // Empty node accepts even with a zero threshold.
        assert_eq!(decide(0, 0.0, 0.0, 1, Some(4), 0), Ok(OffloadDecision::Accept));
        assert_eq!(decide(0, 0.3, 0.2, 1, None, 0), Err(PolicyError::NoNeighbor));
        assert!(decide(2, 0.3, 0.2, 1, Some(4), 0).is_err());
    }

    #[test]
    fn best_neighbor_examples() {
        assert_eq!(best_neighbor(&[entry(0, 4.0, 30.0), entry(1, 6.0, 20.0)]), Ok(1));
        assert_eq!(best_neighbor(&[entry(9, 1.0, 1.0)]), Ok(9));
        assert_eq!(best_neighbor(&[entry(5, 2.0, 10.0), entry(3, 2.0, 10.0)]), Ok(3));
        assert_eq!(best_neighbor(&[]), Err(PolicyError::EmptyTable));
    }

    #[test]
    fn routing_examples() {
        let nfp = iot(0.0, 0.85, 0.15);
        for u in [0.0, 0.3, 0.99] {
            for t in RequestType::ALL {
                assert_eq!(route_from_iot(&nfp, t, PolicyMode::Nfp, u), Route::Cloud);
            }
        }
        assert_eq!(route_from_iot(&nfp, RequestType::Light, PolicyMode::Afp, 0.5), Route::Fog);
        let s3 = iot(0.1, 0.75, 0.15);
        assert_eq!(route_from_iot(&s3, RequestType::Heavy, PolicyMode::Lfp, 0.95), Route::Cloud);
        assert_eq!(route_from_iot(&s3, RequestType::Heavy, PolicyMode::Lfp, 0.5), Route::Cloud);
        assert_eq!(route_from_iot(&s3, RequestType::Light, PolicyMode::Lfp, 0.5), Route::Fog);
        assert_eq!(route_from_iot(&s3, RequestType::Light, PolicyMode::Lfp, 0.05), Route::Local);
    }

    #[test]
    fn mode_projection() {
        let s = iot(0.1, 0.75, 0.15);
        let lh = s.routing(RequestType::Heavy, PolicyMode::Lfp);
        assert_eq!((lh.p_fog, lh.p_cloud), (0.0, 0.9));
        assert_eq!(s.routing(RequestType::Light, PolicyMode::Lfp).p_fog, 0.75);
        for t in RequestType::ALL {
            let r = s.routing(t, PolicyMode::Nfp);
            assert_eq!((r.p_fog, r.p_cloud), (0.0, 0.9));
        }
    }

    #[test]
    fn routing_frequencies_match_chi_square() {
        use rand::{Rng, SeedableRng};
        let s = iot(0.1, 0.75, 0.15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = [0f64; 3];
        for _ in 0..n {
            let idx = match route_from_iot(&s, RequestType::Light, PolicyMode::Afp, rng.random()) {
                Route::Local => 0,
                Route::Fog => 1,
                Route::Cloud => 2,
            };
            counts[idx] += 1.0;
        }
        let expected = [0.1, 0.75, 0.15].map(|p| p * n as f64);
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(o, e)| (o - e).powi(2) / e)
            .sum();
        // 99.9% quantile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn light_share_with_even_weight_is_proportional() {
        for n in 0..40u64 {
            for n2 in 0..40u64 {
                if n + n2 > 0 {
                    assert_eq!(light_share(n, n2, 0.5), n as f64 / (n + n2) as f64);
                }
            }
        }
        assert_eq!(light_share(0, 0, 0.5), 0.0);
    }

    proptest! {
        #[test]
        fn never_offloads_to_fog_without_budget(w in 0.0..100.0f64, theta in 0.0..100.0f64) {
            let d = decide(0, w, theta, 0, Some(1), 0).unwrap();
            prop_assert!(!matches!(d, OffloadDecision::OffloadToFog(_)));
        }

        #[test]
        fn forward_count_stays_within_limit(e_m in 0u32..6, ws in prop::collection::vec(0.0..10.0f64, 1..12)) {
            let mut n_fwd = 0u32;
            for w in ws {
                match decide(n_fwd, w, 1.0, e_m, Some(0), 0).unwrap() {
                    OffloadDecision::OffloadToFog(_) => n_fwd += 1,
                    _ => break,
                }
                prop_assert!(n_fwd <= e_m);
            }
        }

        #[test]
        fn estimate_is_linear_in_counts(c in 0u64..1000, c2 in 0u64..1000, z in 0.001..50.0f64, z2 in 0.001..50.0f64) {
            let one = estimate_waiting(&est(c, z, c2, z2));
            let two = estimate_waiting(&est(2 * c, z, 2 * c2, z2));
            prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
        }

        #[test]
        fn best_neighbor_ignores_order(rows in prop::collection::vec((0.0..10.0f64, 0.0..50.0f64), 1..10), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let table: Vec<_> = rows.iter().enumerate().map(|(i, &(r, w))| entry(i, r, w)).collect();
            let mut shuffled = table.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(best_neighbor(&table), best_neighbor(&shuffled));
        }

        #[test]
        fn ewma_stays_between_old_and_measured(old in 0.001..100.0f64, m in 0.001..100.0f64, alpha in 0.0..=1.0f64) {
            let e = WaitingTimeEstimator { alpha, ..est(0, old, 0, 1.0) };
            let z = update_estimate(e, RequestType::Light, m).unwrap().z_light;
            prop_assert!(z >= old.min(m) - 1e-12 && z <= old.max(m) + 1e-12);
        }
    }
}
