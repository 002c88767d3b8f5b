"""Smoke test for the pysvardag extension module."""

import math

import pysvardag as sd


def main():
    assert abs(sd.h_value([[0.0, 0.5], [0.5, 0.0]]) + math.log(0.75)) < 1e-12
    assert sd.h_value([[0.0, 0.3], [0.0, 0.0]]) == 0.0
    grad = sd.h_gradient([[0.0, 0.5], [0.5, 0.0]])
    assert abs(grad[0][1] - 0.5 / 0.75) < 1e-12
    assert abs(sd.h_notears([[0.0, 0.5], [0.5, 0.0]]) - (2 * math.cosh(0.25) - 2)) < 1e-12
    assert sd.is_dag([[0.0, 1.0], [0.0, 0.0]])
    assert not sd.is_dag([[0.0, 1.0], [1.0, 0.0]])

    gt = sd.simulate(8, 1, 1500, seed=3, avg_degree_w=2.0)
    assert len(gt.x) == 1500 and len(gt.x[0]) == 8
    assert gt.companion_radius < 1.0

    cfg = sd.SolverConfig(lambda_w=0.01, max_outer=50)
    res = sd.learn(gt.x, 1, cfg)
    assert res.h_final <= 1e-8
    assert sd.is_dag(res.w_hat)
    assert len(res.a_hat) == 8 and len(res.trace) == res.outer_iterations
    m = sd.metrics(res.w_hat, res.a_hat, gt.w_true, gt.a_true)
    print("cvx", {k: round(v, 4) for k, v in m.items()})

    base = sd.learn(gt.x, 1, cfg, method="baseline")
    assert sd.is_dag(base.w_hat)

    try:
        sd.learn(gt.x[:1], 1)
    except ValueError as e:
        assert "insufficient samples" in str(e)
    else:
        raise AssertionError("expected ValueError")
    try:
        sd.SolverConfig(bogus=1)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
    print("smoke test ok")


if __name__ == "__main__":
    main()
