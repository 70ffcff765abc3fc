"""Smoke test for the pyreactfem extension module.

Build and run from the repository root:

    cargo build --release -p reactfem-py --features extension-module
    cp target/release/libpyreactfem.so python/pyreactfem.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyreactfem as rf  # noqa: E402


def check_mesh():
    mesh = rf.Mesh.structured((2.0, 1.0), (5, 3), "tri3")
    assert mesh.num_nodes == 15
    assert mesh.num_elements == 16
    assert math.isclose(mesh.total_area(), 2.0)
    assert mesh.nodes[0] == (0.0, 0.0)
    assert rf.Mesh.for_benchmark("point_sources").num_nodes == 21 * 21


def check_qp():
    h = [[2.0, -1.0], [-1.0, 2.0]]
    sol = rf.solve_box_qp(h, [1.0, -3.0], [0.0, 0.0], [10.0, 10.0])
    # The unconstrained minimizer has c[1] < 0, so the lower bound binds
    # and c[0] = 1/2 from the first row.
    assert sol["c"] == [0.5, 0.0], sol["c"]
    assert math.isclose(sol["lambda_min"][1], 2.5)
    assert sol["kkt"]["max_relative"] <= 1e3 * 2.0**-52
    try:
        rf.solve_box_qp([[1.0, 2.0], [2.0, 1.0]], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0])
    except RuntimeError:
        pass
    else:
        raise AssertionError("indefinite Hessian accepted")


def check_recovery():
    a, b, c = rf.recover_species([0.7, 0.2], [0.2, 0.2], (1.0, 1.0, 1.0), 0.0)
    assert [round(v, 12) for v in a] == [0.5, 0.0]
    assert [round(v, 12) for v in b] == [0.0, 0.0]
    assert [round(v, 12) for v in c] == [0.2, 0.2]
    stats = rf.violation_stats([-1.0, 2.0, 4.0, -0.5])
    assert stats["min"] == -1.0 and stats["max"] == 4.0
    assert stats["percent_nodes_violating"] == 50.0


def check_benchmarks():
    assert "slug" in rf.benchmark_ids()
    (raw,) = rf.run_benchmark("point_sources", 21, formulation="galerkin", eps=0.0)
    stats = rf.violation_stats(raw["F"])
    assert round(stats["min_over_max_percent"], 2) == -0.11
    (con,) = rf.run_benchmark("point_sources", 21, formulation="constrained")
    assert min(con["C"]) >= 0.0
    assert con["kkt_F"]["max_relative"] <= 1e3 * 2.0**-52
    assert min(con["lambda_min_F"]) >= 0.0
    levels = rf.run_benchmark("slug", 11, dt=0.25, horizon=1.0)
    assert [lv["time"] for lv in levels] == [0.25, 0.5, 0.75, 1.0]


def check_cli():
    with tempfile.TemporaryDirectory() as out:
        code = rf.run_cli(["run", "--benchmark", "tank", "--seeds", "11", "--no-fields", "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "manifest.json")) as fh:
            assert json.load(fh)["status"] == "ok"
        assert rf.run_cli(["run", "--benchmark", "nope", "--out-dir", out]) == 2


if __name__ == "__main__":
    for check in (check_mesh, check_qp, check_recovery, check_benchmarks, check_cli):
        check()
        print(f"{check.__name__}: ok")
    print("pyreactfem smoke test passed")
