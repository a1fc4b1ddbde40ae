"""Smoke test for the fogsim Python extension."""

import math

import fogsim


def main():
    assert "setting2" in fogsim.Scenario.presets()
    sc = fogsim.Scenario.preset("setting2").resized(40, 5, 1, avg_degree=2.0)
    assert sc.violations() == []
    assert fogsim.Scenario.from_toml(sc.to_toml()).to_toml() == sc.to_toml()

    sim = fogsim.simulate(sc, mode="afp", requests=50_000, seed=3)
    assert sim.generated == sim.completed == 50_000
    assert sim.max_n_fwd <= 1
    anl = fogsim.analyze(sc, mode="afp")
    assert anl.residual < 1e-8
    for t in ("light", "heavy"):
        rel = abs(anl.mean_delay(t) / sim.mean_delay(t) - 1.0)
        print(f"{t}: sim {sim.mean_delay(t):.2f} +/- {sim.ci95(t):.2f} ms, analytic {anl.mean_delay(t):.2f} ms")
        assert rel < 0.15, rel

    ss = fogsim.solve_chain(0.5, 0.0, 1.0, 0.5)
    assert abs(ss.get(3, 0) - 0.5 * 0.5**3) < 1e-8
    assert abs(ss.mean_wait(1.0, 0.5) - 1.0) < 1e-8
    assert ss.acceptance_prob(1.0, 0.5, math.inf) == 1.0
    assert abs(fogsim.cloud_wait(0.3, 0.0, 1, 2.0, 7.0) - 5.0) < 1e-12
    assert fogsim.light_share(3, 1, 0.5) == 0.75

    hot = sc.with_param("fog.theta_ms", math.inf).with_param("iot.gamma_light", 50.0)
    try:
        fogsim.analyze(hot)
    except fogsim.UnstableError as e:
        print("unstable as expected:", e)
    else:
        raise AssertionError("expected UnstableError")
    try:
        sc.with_param("domain.nothing", 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
