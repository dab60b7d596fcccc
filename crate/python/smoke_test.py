"""Smoke test for the grsreach extension module.

Build and install first:
    cd crates/python && maturin build --release -o dist && pip install dist/grsreach-*.whl
"""

import math
import sys
import tempfile
from pathlib import Path

import grsreach


def close(x, y, tol):
    return abs(x - y) <= tol


def main():
    consts = grsreach.quadrotor_constants()
    assert close(consts["jx"], 0.009, 1e-12), consts
    assert close(consts["jz"], 0.014, 1e-12), consts
    assert close(consts["b"], 1000.0 / 9.0, 1e-9), consts
    assert close(consts["c"], 2.0, 0.0), consts
    assert close(consts["a"][0], -5.0 * math.pi / 1.8, 1e-9), consts

    proxy = grsreach.Proxy.quadrotor()
    assert close(proxy.domain_radius, proxy.gain / proxy.decay, 1e-12)
    boundary = proxy.grs_boundary(0.25, 72)
    assert len(boundary) == 72

    # Zero drift: radial distance follows (b/c)(1 - exp(-cT)).
    flat = grsreach.Proxy([0.0, 0.0], [[2.0, 0.0], [0.0, 4.0]], 0.5, 0.5)
    end, clamped = flat.endpoint([1.0, 0.0], 1.0)
    assert not clamped
    assert close(math.hypot(*end), 2.0 * (1.0 - math.exp(-1.0)), 1e-6), end

    sc = grsreach.scenario("A")
    r_raw = proxy.learning_radius(sc["k"], sc["dt"], 2)
    assert close(r_raw, sc["expected_r"], 0.15 * sc["expected_r"]), (r_raw, sc)

    run = grsreach.run_scenario("A", angle=120.0)
    print(run)
    assert run.success, run.message
    assert run.final_error <= 2.0 * sc["expected_r"], run.final_error
    assert len(run.times) == len(run.states)
    assert all(b >= a for a, b in zip(run.theta, run.theta[1:]))

    with tempfile.TemporaryDirectory() as d:
        paths = run.write_artifacts(d)
        assert any(Path(p).name == "diag.json" for p in paths), paths

    checks = grsreach.verify("proxy")
    assert checks and all(c["passed"] for c in checks), checks
    assert not any(c["passed"] for c in grsreach.verify("proxy", tolerance_scale=-1.0))

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
