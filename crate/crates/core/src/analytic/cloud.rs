//! Cloud servers as `m` parallel M/G/1 units behind a uniform load balancer.

use crate::error::{Error, Result};
use crate::model::{CloudSpec, NodeId, RequestType};

/// Moments of one processing unit under a two-class load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudLoad {
    /// Arrival rate per unit.
    pub lambda: f64,
    pub mean_service: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub rho: f64,
    /// Mean sojourn per unit (ms).
    pub sojourn: f64,
}

impl CloudLoad {
    /// Mean time in queue before service starts.
    pub fn queueing(&self) -> f64 {
        (self.sojourn - self.mean_service).max(0.0)
    }

    /// Mean sojourn of one request type: queueing plus its own service.
    pub fn class_sojourn(&self, cloud: &CloudSpec, rtype: RequestType) -> f64 {
        self.queueing() + cloud.z(rtype)
    }
}

/// Pollaczek–Khinchine sojourn of a cloud unit with hyperexponential
/// service. With no load the limit, the mean service time, is returned; when
/// both rates are zero the two classes are weighted equally.
pub fn cloud_load(l_light: f64, l_heavy: f64, cloud: &CloudSpec) -> Result<CloudLoad> {
    if !(l_light >= 0.0 && l_heavy >= 0.0) {
        return Err(Error::Parameter("cloud arrival rates must be nonnegative".into()));
    }
    let total = l_light + l_heavy;
    let (w, w2) = if total > 0.0 {
        (l_light / total, l_heavy / total)
    } else {
        (0.5, 0.5)
    };
    let (z, z2) = (cloud.z_light, cloud.z_heavy);
    let es = w * z + w2 * z2;
    let es2 = w * 2.0 * z * z + w2 * 2.0 * z2 * z2;
    let var = es2 - es * es;
    let lambda = total / cloud.m as f64;
    let rho = lambda * es;
    if rho >= 1.0 {
        return Err(Error::Unstable {
            node: NodeId::Cloud(cloud.id),
            detail: format!("per-unit load {rho:.4} >= 1"),
        });
    }
    let sojourn = if lambda == 0.0 {
        es
    } else {
        (2.0 * rho + lambda * lambda * var - rho * rho) / ((2.0 - 2.0 * rho) * lambda)
    };
    Ok(CloudLoad {
        lambda,
        mean_service: es,
        second_moment: es2,
        variance: var,
        rho,
        sojourn,
    })
}

/// Mean sojourn at a cloud server (ms).
pub fn cloud_wait(l_light: f64, l_heavy: f64, cloud: &CloudSpec) -> Result<f64> {
    cloud_load(l_light, l_heavy, cloud).map(|c| c.sojourn)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(m: usize, z: f64, z2: f64) -> CloudSpec {
        CloudSpec {
            id: 0,
            m,
            z_light: z,
            z_heavy: z2,
        }
    }

    #[test]
    fn hand_substitution() {
        let c = cloud_load(0.1, 0.1, &cloud(1, 1.0, 4.0)).unwrap();
        assert!((c.mean_service - 2.5).abs() < 1e-12);
        assert!((c.second_moment - 17.0).abs() < 1e-12);
        assert!((c.variance - 10.75).abs() < 1e-12);
        assert!((c.rho - 0.5).abs() < 1e-12);
        assert!((c.sojourn - 5.9).abs() < 1e-12);
    }

    #[test]
    fn exponential_reduces_to_mm1() {
        let d = cloud_wait(0.3, 0.0, &cloud(1, 2.0, 7.0)).unwrap();
        assert!((d - 1.0 / (0.5 - 0.3)).abs() < 1e-12);
        let d = cloud_wait(0.0, 1.2, &cloud(4, 7.0, 2.0)).unwrap();
        assert!((d - 1.0 / (0.5 - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn zero_load_limit() {
        assert_eq!(cloud_wait(0.0, 0.0, &cloud(2, 1.0, 3.0)).unwrap(), 2.0);
        let d = cloud_wait(1e-9, 0.0, &cloud(1, 1.0, 3.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
    }

    #[test]
    fn saturation_is_an_error() {
        assert!(matches!(
            cloud_wait(1.0, 0.0, &cloud(1, 1.0, 1.0)),
            Err(Error::Unstable { .. })
        ));
    }
}
