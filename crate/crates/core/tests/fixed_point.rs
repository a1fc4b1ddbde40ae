//! The damped iteration and the default update reach the same fixed point.

mod common;

use fogsim::analytic::{solve_flows, FlowOptions};
use fogsim::model::PolicyMode;

#[test]
fn damped_and_bracketed_updates_agree() {
    let mut c = fogsim::model::presets::preset("setting5").unwrap();
    c.network.n_iot = 12;
    c.network.n_fog = 3;
    c.network.n_cloud = 1;
    c.network.avg_degree = 2.0;
    let t = common::build(&c);
    let fast = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
    let damped = FlowOptions {
        accelerate: false,
        max_iter: 500,
        ..FlowOptions::default()
    };
    let slow = solve_flows(&t, PolicyMode::Afp, &damped).unwrap();
    assert!(slow.residual < 1e-8);
    for (a, b) in fast.fogs.iter().zip(&slow.fogs) {
        assert!((a.accept_prob - b.accept_prob).abs() < 1e-6, "{} vs {}", a.accept_prob, b.accept_prob);
    }
}

// Plain damping can cycle where the default update converges.
#[test]
fn damped_iteration_can_fail_to_converge() {
    let mut c = fogsim::model::presets::preset("setting2").unwrap();
    c.network.n_iot = 12;
    c.network.n_fog = 3;
    c.network.n_cloud = 1;
    c.network.avg_degree = 2.0;
    let t = common::build(&c);
    let damped = FlowOptions {
        accelerate: false,
        max_iter: 60,
        ..FlowOptions::default()
    };
    match solve_flows(&t, PolicyMode::Afp, &damped) {
        Err(fogsim::Error::NoConvergence { trajectory, .. }) => assert!(!trajectory.is_empty()),
        other => panic!("expected no convergence, got {other:?}"),
    }
    assert!(solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).is_ok());
}
