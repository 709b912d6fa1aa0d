"""Acceptance suite: one test per criterion, each with its runtime bound.

Every test loads fresh builtin models, so lazily computed pieces (generators,
strata, Poisson matrices) are charged to the criterion that needs them.
"""
import json
import time
from pathlib import Path

import pytest

from symred.builtins import builtin_config, builtin_names
from symred.cli import main
from symred.invariants import molien_dimension
from symred.model import load_model
from symred.verify import CHECKS


def _run(check, names=None):
    names = names or builtin_names()
    t0 = time.perf_counter()
    out = {n: CHECKS[check](load_model(builtin_config(n))) for n in names}
    return out, time.perf_counter() - t0


def _applicable(results):
    return {n: r for n, r in results.items() if r.applicable}


def test_criterion_01_adapted_complex_structure():
    res, elapsed = _run("adapted_j")
    for r in res.values():
        m = r.measured
        assert r.passed, r.detail
        assert m["trials"] == 200
        assert m["J2_plus_I"] <= 1e-9 and m["symplectic"] <= 1e-9
        assert m["min_eig_gJ"] > 0
        assert m["closed_form_error"] <= 1e-12
    assert elapsed < 5


def test_criterion_02_constant_rank_split():
    res, elapsed = _run("constant_rank")
    for r in res.values():
        m = r.measured
        assert r.passed, r.detail
        assert m["max_block_residual"] <= 1e-9
        assert m["size_mismatches"] == 0 and m["sizes_ok"]
        assert m["max_gap"] == 0.0  # corner cases exact
    assert elapsed < 5


def test_criterion_03_momentum_equivariance():
    res, elapsed = _run("momentum_equivariance")
    app = _applicable(res)
    assert set(app) == {"circle_1_-1", "so3_central_force"}
    for r in app.values():
        assert r.passed, r.detail
    assert elapsed < 1


def test_criterion_04_invariant_generators():
    res, elapsed = _run("invariant_generators")
    for r in res.values():
        assert r.passed, r.detail
    assert res["z2_cone"].measured["generators"] == ["q1^2", "q1*p1", "p1^2"]
    circ = res["circle_1_-1"].measured
    assert circ["generators"] == ["q1^2 + p1^2", "q2^2 + p2^2", "q1*q2 - p1*p2", "q1*p2 + q2*p1"]
    assert circ["relations"] == ["y1*y2 - y3^2 - y4^2"]
    for name in ("z2_cone", "klein_r4"):
        table = res[name].measured["degree_table"]
        model = load_model(builtin_config(name))
        assert [row["degree"] for row in table] == list(range(9))
        assert all(row["spanned"] == molien_dimension(model.spec, row["degree"]) for row in table)
    assert elapsed < 10


def test_criterion_05_reduced_poisson_structure():
    res, elapsed = _run("poisson_structure")
    for r in res.values():
        m = r.measured
        assert r.passed, r.detail
        assert m["antisymmetric"] and m["substitution_exact"] and m["jacobi_exact"] and m["noether_exact"]
    assert res["z2_cone"].measured["lambda"] == [
        ["0", "2*y1", "4*y2"],
        ["-2*y1", "0", "2*y3"],
        ["-4*y2", "-2*y3", "0"],
    ]
    assert elapsed < 10


def test_criterion_06_norm_f_squared():
    res, elapsed = _run("norm_f", ["circle_1_-1"])
    r = res["circle_1_-1"]
    assert r.passed, r.detail
    # 1/4 (y1 - y2)^2 expanded
    assert r.measured["f"] == "1/4*y1^2 - 1/2*y1*y2 + 1/4*y2^2"
    assert r.measured["pullback_exact"]
    assert elapsed < 1


def test_criterion_07_stratification():
    res, elapsed = _run("stratification")
    for r in res.values():
        m = r.measured
        assert r.passed, r.detail
        assert m["partial_order"]
        for row in m.get("lift", []):
            assert row["enumerated"] == row["reduced"] and row["sampled_ok"]
    assert res["z2_cone"].measured["dims"] == [0, 2]
    assert res["circle_1_-1"].measured["dims"] == [0, 2]
    klein = res["klein_r4"].measured
    assert klein["candidate_classes"] == 5
    assert klein["dims"] == [0, 2, 2, 4]
    assert elapsed < 5


def test_criterion_08_local_model():
    res, elapsed = _run("local_model")
    for name, r in res.items():
        m = r.measured
        assert r.passed, (name, r.detail)
        assert m["points"] == 20 and m["matched"] == 20
        assert m["counterexamples"] == 0
    level = res["circle_1_-1"].measured["level_set"]
    assert level and all(row["samples"] == 10_000 and row["counterexamples"] == 0 for row in level)
    assert res["circle_1_-1"].tolerance["level_set"] == 1e-10
    assert elapsed < 30


def test_criterion_09_twin_experiment():
    res, elapsed = _run("twin")
    app = _applicable(res)
    assert set(app) == {"z2_cone", "circle_1_-1"}
    for r in app.values():
        assert r.passed, r.detail
        for run in r.measured["runs"]:
            assert run["dt"] == 1e-3
            assert run["max_deviation"] <= 1e-6
            assert 12 <= run["order"]["ratio"] <= 20
    assert app["z2_cone"].measured["runs"][0]["h_red"] == "y1 + y3"
    assert app["circle_1_-1"].measured["runs"][0]["h_red"] == "y1 + y2"
    assert elapsed < 60


def test_criterion_10_conservation_and_stratum_preservation():
    res, elapsed = _run("conservation")
    for r in res.values():
        assert r.passed, r.detail
        assert r.measured["runs"]
        for run in r.measured["runs"]:
            assert run["noether_drift"] <= 1e-8
            assert run["escape"] <= 1e-8
    assert elapsed < 60


def test_criterion_11_cross_section():
    res, elapsed = _run("cross_section", ["so3_central_force"])
    r = res["so3_central_force"]
    assert r.passed, r.detail
    for key in ("circular", "generic"):
        m = r.measured[key]
        assert m["out_of_plane"] <= 1e-9
        assert m["L_norm_drift"] <= 1e-8
        assert m["in_interval"]
    assert r.measured["circular"]["period_rel_error"] <= 1e-5
    assert r.measured["boundary_rejected"]
    assert elapsed < 30


def _strip(report_path: Path) -> str:
    report = json.loads(report_path.read_text())
    report.pop("timestamp")
    return json.dumps(report, indent=2, sort_keys=True)


@pytest.mark.slow
def test_criterion_12_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify-all", "--output", str(a)]) == 0
    assert main(["verify-all", "--output", str(b)]) == 0
    elapsed = time.perf_counter() - t0
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    assert len([f for f in files_a if f.name == "report.json"]) == len(builtin_names())
    for rel in files_a:
        if rel.name == "report.json":
            assert _strip(a / rel) == _strip(b / rel), rel
        else:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    assert elapsed < 300
