#!/usr/bin/env python3
"""Smoke test for the qpd extension module.

Builds nothing itself: expects `cargo build -p qpd-py` to have produced
target/debug/libqpd.so (or .dylib). Run from anywhere:

    python3 python/smoke_test.py
"""

import importlib.machinery
import importlib.util
import json
import math
import sys
from pathlib import Path


def load_module():
    root = Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / "debug" / "libqpd.so",
        root / "target" / "debug" / "libqpd.dylib",
        root / "target" / "release" / "libqpd.so",
        root / "target" / "release" / "libqpd.dylib",
    ]
    for path in candidates:
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("qpd", str(path))
            spec = importlib.util.spec_from_loader("qpd", loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("libqpd not found; run `cargo build -p qpd-py` first")


def main():
    qpd = load_module()

    scenarios = qpd.list_scenarios()
    assert len(scenarios) == 12, scenarios
    assert "two_four_level" in scenarios

    # Deformation window on hand values: b = (0, 1, 3), a = (0, 2, 1).
    # Pairs with rising b and differing a give ratios -db/da; the scan
    # must return the tightest window (-1/2, 2).
    xi_minus, xi_plus = qpd.xi_thresholds([0.0, 1.0, 3.0], [0.0, 2.0, 1.0])
    assert abs(xi_minus + 0.5) < 1e-12, xi_minus
    assert abs(xi_plus - 2.0) < 1e-12, xi_plus

    # Restricting to a partition that separates the binding pair opens
    # the window.
    xi_minus_r, _ = qpd.xi_thresholds([0.0, 1.0, 3.0], [0.0, 2.0, 1.0], [0, 1, 1])
    assert xi_minus_r is None or xi_minus_r < -0.5

    assert qpd.values_are_passive([0.0, 1.0, 2.0], [0.5, 0.3, 0.2])
    assert not qpd.values_are_passive([0.0, 2.0, 1.0], [0.5, 0.3, 0.2])

    slack = qpd.deformation_slack(
        [0.0, 1.0, 3.0], [0.0, 2.0, 1.0], [0.6, 0.3, 0.1], [0.5, 0.35, 0.15], -0.5
    )
    assert slack > 0.0, slack

    # Sorting protocols agree on the optimum; the lazy one is never
    # more expensive.
    p = [0.05, 0.40, 0.15, 0.25, 0.15]
    a = [0.0, 1.0, 0.0, 1.0, 2.0]
    full_perm, full_moves, full_delta = qpd.full_sort(p, a)
    part_perm, part_moves, part_delta = qpd.partial_sort(p, a)
    assert full_delta == part_delta
    assert part_moves <= full_moves
    assert sorted(full_perm) == list(range(5))

    assert qpd.majorization_worst_slack([0.7, 0.3], [0.6, 0.4]) >= 0.0
    assert qpd.majorization_worst_slack([0.6, 0.4], [0.7, 0.3]) < 0.0

    q, cluster_of = qpd.coarse_grain([0.0, 0.1, 1.0, 1.1], [[0, 1], [2, 3]])
    assert cluster_of == [0, 0, 1, 1]
    assert abs(q[0] - 0.05) < 1e-12 and abs(q[1] - 1.05) < 1e-12
    try:
        qpd.coarse_grain([0.0, 1.0, 0.5, 1.5], [[0, 1], [2, 3]])
    except ValueError as e:
        assert "overlap" in str(e)
    else:
        raise AssertionError("overlapping clusters were accepted")

    assert qpd.beta_c_star(0.4, 3.0, 1.0) == 1.2000000000000002

    # Scenario round trip: verdicts satisfied, window edge where the
    # audit pinned it, and the result carries the setup's own hash.
    res = json.loads(qpd.run_scenario("two_four_level", seed=7))
    assert all(v["satisfied"] for v in res["verdicts"]), res["verdicts"]
    assert math.isclose(float(res["metadata"]["xi_minus"]), -0.625, abs_tol=1e-12)
    assert math.isclose(float(res["metadata"]["xi_minus_restricted"]), -0.875, abs_tol=1e-12)
    assert res["setup_hash"] == qpd.setup_hash(qpd.default_setup("two_four_level"))

    # Determinism: identical seed, identical bytes.
    again = qpd.run_scenario("two_four_level", seed=7)
    assert json.loads(again) == res
    assert again == qpd.run_scenario("two_four_level", seed=7)

    # A setup given as text runs the same as its bundled twin.
    text = qpd.default_setup("optimal_protocol_demo")
    res_text = json.loads(qpd.run_scenario(text, seed=7))
    assert res_text["scenario"] == "optimal_protocol_demo"
    assert int(res_text["metadata"]["partial_transpositions"]) < int(
        res_text["metadata"]["full_transpositions"]
    )

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
