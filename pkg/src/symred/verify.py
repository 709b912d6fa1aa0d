"""Named verification checks, one per acceptance criterion.

Each check takes a loaded :class:`~symred.model.Model` and returns a
:class:`CheckResult`.  Checks that do not apply to a model (e.g. the
cross-section scenario for a finite group) report ``applicable=False`` and
pass vacuously.  All tolerances are multiplied by the model's tolerance scale.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .dynamics import (
    HamiltonianSystem,
    check_noether,
    check_stratum_preservation,
    circular_orbit,
    compare_full_vs_reduced,
    cross_section_scenario,
    energy_order_test,
    eq_hamilton_residual,
    forward_backward,
    integrate_full,
    order_test,
)
from .errors import AmbiguityError, PreconditionError
from .groups import FiniteMatrixGroup, MatrixLieAlgebra, Torus, check_equivariance, close_group, to_float
from .invariants import (
    bracket_closure,
    check_minimality,
    degree_dimension_table,
    express_in_generators,
    generator_relations,
    is_invariant,
    noether_table,
)
from .strata import (
    abelian_model_level_set,
    frontier_diagnostic,
    local_model_base_points,
    local_model_match,
    mwm_stratum,
    stratification_report,
)
from .symplin import (
    SymplecticSpace,
    Subspace,
    adapted_complex_structure,
    constant_rank_split,
    standard_omega,
    subspace_gap,
    symplectic_perp,
)


@dataclass
class CheckResult:
    name: str
    criterion: int
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    detail: list = field(default_factory=list)
    applicable: bool = True

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "criterion": self.criterion,
            "passed": self.passed,
            "applicable": self.applicable,
            "measured": _jsonable(self.measured),
            "tolerance": _jsonable(self.tolerance),
            "detail": _jsonable(self.detail),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    return x


def _not_applicable(name: str, criterion: int, why: str) -> CheckResult:
    return CheckResult(name, criterion, True, detail=[why], applicable=False)


def _all_zero(polys) -> bool:
    return all(p.is_zero() for p in polys)


# --------------------------------------------------------------------------
# 1. adapted complex structures


def check_adapted_j(model, trials: int = 200) -> CheckResult:
    tol = model.tol("adapted_j", 1e-9)
    rng = np.random.default_rng(model.seed)
    worst = {"J2_plus_I": 0.0, "symplectic": 0.0}
    min_pos = np.inf
    for _ in range(trials):
        n = int(rng.integers(1, 11))
        M = np.eye(2 * n) + 0.3 * rng.normal(size=(2 * n, 2 * n)) / np.sqrt(2 * n)
        Om = M.T @ standard_omega(n) @ M
        S = SymplecticSpace(0.5 * (Om - Om.T))
        R = rng.normal(size=(2 * n, 2 * n))
        g = R.T @ R + 0.1 * np.eye(2 * n)
        r = adapted_complex_structure(S, g).residuals()
        worst["J2_plus_I"] = max(worst["J2_plus_I"], r["J2_plus_I"])
        worst["symplectic"] = max(worst["symplectic"], r["symplectic"])
        min_pos = min(min_pos, r["min_eig_gJ"])
    # closed forms: g = I gives J = Omega^T; n = 1, g = diag(4, 1)
    closed = 0.0
    for n in range(1, 5):
        J = adapted_complex_structure(SymplecticSpace.standard(n), np.eye(2 * n))
        closed = max(closed, float(np.abs(J.J - standard_omega(n).T).max()))
    J = adapted_complex_structure(SymplecticSpace.standard(1), np.diag([4.0, 1.0]))
    closed = max(
        closed,
        float(np.abs(J.A - np.array([[0, -0.25], [1, 0]])).max()),
        float(np.abs(J.P - 0.5 * np.eye(2)).max()),
        float(np.abs(J.J - np.array([[0, -0.5], [2, 0]])).max()),
        float(np.abs(J.metric() - np.diag([2.0, 0.5])).max()),
    )
    closed_tol = 1e-12 * model.tolerance_scale
    passed = worst["J2_plus_I"] <= tol and worst["symplectic"] <= tol and min_pos > 0 and closed <= closed_tol
    return CheckResult(
        "adapted_j", 1, passed,
        {**worst, "min_eig_gJ": min_pos, "closed_form_error": closed, "trials": trials},
        {"relative": tol, "closed_form": closed_tol},
    )


# --------------------------------------------------------------------------
# 2. constant-rank splitting


def _random_symplectic(rng, n: int) -> np.ndarray:
    A = rng.normal(size=(2 * n, 2 * n))
    return scipy.linalg.expm(standard_omega(n) @ (0.15 * (A + A.T)))


def _split_errors(W: Subspace, S: SymplecticSpace, J) -> tuple[float, tuple[int, ...], float]:
    """Worst vanishing Gram block, block sizes and the smallest singular value of the nondegenerate blocks."""
    split = constant_rank_split(W, S, J)
    E, N, nu, Jnu = (x.orthonormal() for x in (split.E, split.N, split.nu, split.Jnu))
    Om = S.omega
    blocks = {"E": E, "N": N, "nu": nu, "Jnu": Jnu}
    zero_pairs = [("E", "N"), ("E", "nu"), ("E", "Jnu"), ("N", "nu"), ("N", "Jnu"), ("nu", "nu"), ("Jnu", "Jnu")]
    worst = 0.0
    for a, b in zero_pairs:
        if blocks[a].shape[1] and blocks[b].shape[1]:
            worst = max(worst, float(np.abs(blocks[a].T @ Om @ blocks[b]).max()))
    # nu and E lie in W
    for X in (nu, E):
        for c in X.T:
            worst = max(worst, W.distance(c))
    smin = np.inf
    for a, b in (("E", "E"), ("N", "N"), ("nu", "Jnu")):
        if blocks[a].shape[1]:
            smin = min(smin, float(np.linalg.svd(blocks[a].T @ Om @ blocks[b], compute_uv=False).min()))
    return worst, split.block_sizes(), smin


def check_constant_rank(model, trials: int = 200) -> CheckResult:
    tol = model.tol("constant_rank", 1e-9)
    rng = np.random.default_rng(model.seed + 1)
    worst = 0.0
    smin = np.inf
    bad_sizes = []
    for t in range(trials):
        n = int(rng.integers(1, 7))
        k_nu = int(rng.integers(0, n + 1))
        s = int(rng.integers(0, n - k_nu + 1))
        if k_nu + s == 0:
            s = 1 if n > k_nu else 0
            k_nu = 1 if s == 0 else k_nu
        Phi = _random_symplectic(rng, n)
        cols = [Phi[:, i] for i in range(k_nu)]
        for i in range(k_nu, k_nu + s):
            cols += [Phi[:, i], Phi[:, n + i]]
        # mix the spanning set so the basis is not adapted
        B = np.column_stack(cols) @ (np.eye(len(cols)) + 0.2 * rng.normal(size=(len(cols), len(cols))))
        S = SymplecticSpace.standard(n)
        J = adapted_complex_structure(S, np.eye(2 * n) + 0.05 * _sym(rng, 2 * n))
        w, sizes, sm = _split_errors(Subspace(2 * n, B), S, J)
        worst = max(worst, w)
        smin = min(smin, sm)
        if sizes != (2 * s, 2 * n - 2 * s - 2 * k_nu, k_nu, k_nu):
            bad_sizes.append({"trial": t, "got": sizes, "expected": (2 * s, 2 * n - 2 * s - 2 * k_nu, k_nu, k_nu)})
    corner = _constant_rank_corners()
    passed = worst <= tol and not bad_sizes and smin > 1e-6 and corner["max_gap"] <= 1e-12 and corner["sizes_ok"]
    return CheckResult(
        "constant_rank", 2, passed,
        {"max_block_residual": worst, "min_nondegenerate_sv": smin, "size_mismatches": len(bad_sizes), **corner},
        {"gram": tol, "corner_gap": 1e-12},
        bad_sizes[:5],
    )


def _sym(rng, d: int) -> np.ndarray:
    A = rng.normal(size=(d, d))
    return 0.5 * (A + A.T) / np.sqrt(d)


def _constant_rank_corners() -> dict:
    gaps = []
    ok = True
    # Lagrangian span{q1, q2} in R^4
    S = SymplecticSpace.standard(2)
    J = adapted_complex_structure(S, np.eye(4))
    W = Subspace(4, np.eye(4)[:, :2])
    sp = constant_rank_split(W, S, J)
    ok &= sp.block_sizes() == (0, 0, 2, 2)
    gaps += [subspace_gap(sp.nu, W), subspace_gap(sp.Jnu, Subspace(4, np.eye(4)[:, 2:]))]
    # symplectic span{q1, p1} in R^4
    W = Subspace(4, np.eye(4)[:, [0, 2]])
    sp = constant_rank_split(W, S, J)
    ok &= sp.block_sizes() == (2, 2, 0, 0)
    gaps += [subspace_gap(sp.E, W), subspace_gap(sp.N, symplectic_perp(W, S))]
    # span{q1, q2, p1} in R^6: nu along q2
    S = SymplecticSpace.standard(3)
    J = adapted_complex_structure(S, np.eye(6))
    W = Subspace(6, np.eye(6)[:, [0, 1, 3]])
    sp = constant_rank_split(W, S, J)
    ok &= sp.block_sizes() == (2, 2, 1, 1)
    gaps.append(subspace_gap(sp.nu, Subspace(6, np.eye(6)[:, [1]])))
    return {"max_gap": max(gaps), "sizes_ok": bool(ok)}


# --------------------------------------------------------------------------
# 3. momentum equivariance


def check_momentum_equivariance(model) -> CheckResult:
    if isinstance(model.spec, FiniteMatrixGroup):
        return _not_applicable("momentum_equivariance", 3, "finite group: the momentum map is zero")
    table = check_equivariance(model.F, model.spec)
    nonzero = [(a, b) for a, row in enumerate(table) for b, r in enumerate(row) if not r.is_zero()]
    return CheckResult("momentum_equivariance", 3, not nonzero, {"nonzero_entries": len(nonzero)},
                       {"exact": True}, nonzero)


# --------------------------------------------------------------------------
# 4. invariant generators


def check_invariant_generators(model) -> CheckResult:
    H = model.hilbert
    exp = model.expect
    gens = [g.to_text() for g in H.generators]
    problems = []
    if "generators" in exp and gens != exp["generators"]:
        problems.append({"generators": gens, "expected": exp["generators"]})
    relations = [r.to_text() for r in generator_relations(H)]
    missing = [r for r in exp.get("relations", []) if r not in relations]
    if missing:
        problems.append({"missing_relations": missing, "found": relations})
    invariant = all(is_invariant(g, model.spec) for g in H.generators)
    minimal = check_minimality(H)
    table = []
    if isinstance(model.spec, (FiniteMatrixGroup, Torus)):
        table = degree_dimension_table(H, 8)
        off = [row for row in table if row["spanned"] != row["expected"]]
        if off:
            problems.append({"degree_mismatch": off})
    passed = not problems and invariant and minimal
    return CheckResult(
        "invariant_generators", 4, passed,
        {"generators": gens, "relations": relations, "invariant": invariant, "minimal": minimal,
         "complete": H.complete, "degree_table": table},
        {"exact": True, "degree_table_up_to": 8 if table else None},
        problems,
    )


# --------------------------------------------------------------------------
# 5. reduced Poisson structure


def check_poisson_structure(model) -> CheckResult:
    P = model.poisson
    problems = []
    lam = P.to_json()
    if "poisson_matrix" in model.expect and lam != model.expect["poisson_matrix"]:
        problems.append({"lambda": lam, "expected": model.expect["poisson_matrix"]})
    subst = _all_zero(p for row in P.substitution_residuals() for p in row)
    jac = _all_zero(P.jacobi_residuals().values())
    jac_up = _all_zero(P.bracket_jacobi_residuals().values())
    noether = _all_zero(p for row in noether_table(model.hilbert, model.F) for p in row)
    closure = bracket_closure(model.hilbert)
    passed = not problems and P.antisymmetric() and subst and jac and jac_up and noether and closure
    return CheckResult(
        "poisson_structure", 5, passed,
        {"lambda": lam, "antisymmetric": P.antisymmetric(), "substitution_exact": subst, "jacobi_exact": jac,
         "bracket_jacobi_exact": jac_up, "noether_exact": noether, "bracket_closure": closure},
        {"exact": True},
        problems,
    )


# --------------------------------------------------------------------------
# 6. ||F||^2 through the generators


def check_norm_f(model) -> CheckResult:
    if model.F.algebra_dim == 0:
        return _not_applicable("norm_f", 6, "finite group: the momentum map is zero")
    n2 = model.F.norm_squared()
    f = express_in_generators(n2, model.hilbert)
    pulled_ok = model.hilbert.pullback(f) == n2
    text = f.to_text()
    problems = []
    if "norm_F_squared" in model.expect and text != model.expect["norm_F_squared"]:
        problems.append({"got": text, "expected": model.expect["norm_F_squared"]})
    return CheckResult("norm_f", 6, pulled_ok and not problems, {"f": text, "pullback_exact": pulled_ok},
                       {"exact": True}, problems)


# --------------------------------------------------------------------------
# 7. stratification


def _contained(A: np.ndarray, B: Subspace, tol: float = 1e-9) -> bool:
    return all(B.distance(c) <= tol * max(1.0, np.linalg.norm(c)) for c in A.T)


def _inclusion_order(strat, spec) -> set[tuple]:
    """(lower, upper) pairs from fixed-space inclusion, up to group conjugation for finite groups."""
    mats = [to_float(g) for g in close_group(spec)] if isinstance(spec, FiniteMatrixGroup) else [np.eye(spec.dim)]
    pairs = set()
    for lo in strat.strata:
        for up in strat.strata:
            if lo is up:
                continue
            A = lo.fixed_space.orthonormal()
            if any(_contained(g @ A, up.fixed_space) for g in mats) and lo.fixed_space.dim < up.fixed_space.dim:
                pairs.add((lo.isotropy_class, up.isotropy_class))
    return pairs


def check_stratification(model) -> CheckResult:
    strat = model.strata
    exp = model.expect
    problems = []
    dims = strat.dims()
    if "strata_dims" in exp and dims != sorted(exp["strata_dims"]):
        problems.append({"dims": dims, "expected": sorted(exp["strata_dims"])})
    if "candidate_classes" in exp and len(strat.candidate_classes) != exp["candidate_classes"]:
        problems.append({"candidate_classes": len(strat.candidate_classes), "expected": exp["candidate_classes"]})
    partial = strat.is_partial_order()
    closure = strat.closure_pairs()
    inclusion = _inclusion_order(strat, model.spec)
    if closure != inclusion:
        problems.append({"closure_minus_inclusion": [list(map(repr, p)) for p in closure - inclusion],
                         "inclusion_minus_closure": [list(map(repr, p)) for p in inclusion - closure]})
    frontier = frontier_diagnostic(strat)
    if not all(f["ok"] for f in frontier):
        problems.append({"frontier": frontier})
    lift = []
    if isinstance(model.spec, (FiniteMatrixGroup, Torus)):
        for s in strat.strata:
            H = s.subgroup if isinstance(model.spec, FiniteMatrixGroup) else s.isotropy_class
            rep = mwm_stratum(model.spec, H, model.space, model.F, seed=model.seed)
            lift.append({"class": s.label, "enumerated": s.stratum_dim, "reduced": rep.reduced_dim,
                         "sampled_ok": rep.sampled_ok})
            if rep.reduced_dim != s.stratum_dim or not rep.sampled_ok:
                problems.append({"lift": lift[-1]})
    passed = not problems and partial
    return CheckResult(
        "stratification", 7, passed,
        {"dims": dims, "candidate_classes": len(strat.candidate_classes), "realized": len(strat.strata),
         "partial_order": partial, "closure_pairs": len(closure), "lift": lift},
        {"exact": True},
        problems,
    )


# --------------------------------------------------------------------------
# 8. local model


def check_local_model(model, points: int = 20, level_samples: int = 10000) -> CheckResult:
    tol = model.tol("local_model", 1e-10)
    strat = model.strata
    pts = local_model_base_points(model.spec, points, model.seed, strat)
    reports = []
    for i, x in enumerate(pts):
        r = local_model_match(x, model.spec, model.space, seed=model.seed + i, strat=strat)
        reports.append(r)
    failed = [r.to_json() for r in reports if not r.match]
    level = []
    if isinstance(model.spec, Torus):
        for s in strat.strata:
            try:
                rep = abelian_model_level_set(model.spec, s.representative, samples=level_samples,
                                              seed=model.seed, tol=tol)
            except PreconditionError as exc:
                level.append({"class": s.label, "skipped": str(exc)})
                continue
            level.append({"class": s.label, **rep.to_json()})
    counter = sum(d.get("counterexamples", 0) for d in level)
    converged = sum(d.get("converged", 0) for d in level)
    passed = not failed and counter == 0 and (converged > 0 or not level)
    return CheckResult(
        "local_model", 8, passed,
        {"points": len(reports), "matched": sum(r.match for r in reports),
         "partial": sum(r.partial for r in reports), "level_set": level, "counterexamples": counter},
        {"level_set": tol},
        failed[:5],
    )


# --------------------------------------------------------------------------
# 9. twin experiment


def _system(model) -> HamiltonianSystem:
    if "system" not in model.cache:
        model.cache["system"] = HamiltonianSystem(model.spec, model.hamiltonian, model.space, F=model.F)
    return model.cache["system"]


def _simulate_tasks(model, reduced: bool | None = None) -> list[dict]:
    out = []
    for t in model.config.get("tasks", []):
        if t["type"] != "simulate" or "cross_section" in t:
            continue
        if reduced is None or bool(t.get("reduced", False)) == reduced:
            out.append(t)
    return out


def check_twin(model) -> CheckResult:
    tasks = _simulate_tasks(model, reduced=True)
    if not tasks or model.hamiltonian is None:
        return _not_applicable("twin", 9, "no reduced simulate task")
    tol = model.tol("twin", 1e-6)
    eq_tol = model.tol("eq_hamilton", 1e-5)
    lo, hi = 12.0, 20.0
    sys = _system(model)
    H, P = model.hilbert, model.poisson
    measured = []
    passed = True
    for t in tasks:
        v0 = t["v0"]
        tw = compare_full_vs_reduced(sys, H, P, v0, 5.0, 1e-3)
        order = order_test(sys, H, P, v0, 5.0, 0.02)
        energy = energy_order_test(sys, v0, 5.0, 0.02)
        fb = forward_backward(P, tw.h_red, H(np.asarray(v0, float)), 5.0, 1e-3)
        eqh = eq_hamilton_residual(tw.full, H, P, tw.h_red)
        ok = tw.max_deviation <= tol and lo <= order["ratio"] <= hi and eqh <= eq_tol
        passed &= ok
        measured.append({"task": t.get("name", "simulate"), **tw.to_json(), "order": order,
                         "energy_order": energy, "forward_backward": fb, "eq_hamilton": eqh})
    return CheckResult("twin", 9, passed, {"runs": measured},
                       {"deviation": tol, "order_ratio": [lo, hi], "eq_hamilton": eq_tol})


# --------------------------------------------------------------------------
# 10. conservation and stratum preservation


def check_conservation(model) -> CheckResult:
    if model.hamiltonian is None:
        return _not_applicable("conservation", 10, "no Hamiltonian")
    tol = model.tol("conservation", 1e-8)
    sys = _system(model)
    runs = []
    starts = [(t.get("name", "simulate"), np.asarray(t["v0"], float), None) for t in _simulate_tasks(model)]
    starts += [(f"stratum:{s.label}", s.representative, s.fixed_space) for s in model.strata.strata]
    passed = True
    for name, v0, V in starts:
        tr = integrate_full(sys, v0, 10.0, 1e-3, fixed_space=V)
        noe = check_noether(tr)
        esc = check_stratum_preservation(tr, model.spec, V)
        ok = noe <= tol and esc <= tol
        passed &= ok
        runs.append({"start": name, "noether_drift": noe, "escape": esc, "energy_drift": tr.energy_drift,
                     "halvings": tr.halvings})
    return CheckResult("conservation", 10, passed, {"runs": runs}, {"noether": tol, "escape": tol})


# --------------------------------------------------------------------------
# 11. cross-section scenario


def check_cross_section(model) -> CheckResult:
    spec = model.spec
    if not (isinstance(spec, MatrixLieAlgebra) and spec.dim == 6 and spec.k == 3 and model.hamiltonian is not None):
        return _not_applicable("cross_section", 11, "needs the rotation action on T*R^3")
    plane_tol = model.tol("out_of_plane", 1e-9)
    drift_tol = model.tol("angular_momentum", 1e-8)
    period_tol = model.tol("period", 1e-5)
    sys = _system(model)
    B = (0.5, 3.0)
    circ = cross_section_scenario(sys, B, circular_orbit(1.0), T=20.0, dt=1e-3, circular=True)
    generic = cross_section_scenario(sys, B, [1.0, 0.3, 0.0, -0.2, 1.1, 0.0], T=20.0, dt=1e-3)
    guard = False
    try:
        cross_section_scenario(sys, (circ.ell, 3.0), circular_orbit(1.0), T=1.0, dt=1e-3)
    except PreconditionError:
        guard = True
    passed = (
        circ.period_rel_error is not None
        and circ.period_rel_error <= period_tol
        and max(circ.out_of_plane, generic.out_of_plane) <= plane_tol
        and max(circ.L_norm_drift, generic.L_norm_drift) <= drift_tol
        and circ.in_interval
        and generic.in_interval
        and guard
    )
    return CheckResult(
        "cross_section", 11, passed,
        {"circular": circ.to_json(), "generic": generic.to_json(), "boundary_rejected": guard},
        {"out_of_plane": plane_tol, "L_drift": drift_tol, "period_relative": period_tol},
    )


# --------------------------------------------------------------------------
# 12. determinism


def _digest(model) -> str:
    H = model.hilbert
    out = {
        "generators": H.to_json(),
        "lambda": model.poisson.to_json(),
        "strata": stratification_report(model.strata, H, model.F),
    }
    if model.hamiltonian is not None:
        tasks = _simulate_tasks(model)
        if tasks:
            sys = HamiltonianSystem(model.spec, model.hamiltonian, model.space, F=model.F)
            tr = integrate_full(sys, tasks[0]["v0"], 1.0, 1e-3)
            out["trajectory_tail"] = [repr(float(x)) for x in tr.states[-1]]
    return json.dumps(_jsonable(out), sort_keys=True)


def check_determinism(model) -> CheckResult:
    from .model import load_model

    a = _digest(load_model(model.config, model.seed, model.tolerance_scale))
    b = _digest(load_model(model.config, model.seed, model.tolerance_scale))
    return CheckResult("determinism", 12, a == b, {"identical": a == b, "bytes": len(a)}, {"exact": True})


CHECKS: dict[str, Callable] = {
    "adapted_j": check_adapted_j,
    "constant_rank": check_constant_rank,
    "momentum_equivariance": check_momentum_equivariance,
    "invariant_generators": check_invariant_generators,
    "poisson_structure": check_poisson_structure,
    "norm_f": check_norm_f,
    "stratification": check_stratification,
    "local_model": check_local_model,
    "twin": check_twin,
    "conservation": check_conservation,
    "cross_section": check_cross_section,
    "determinism": check_determinism,
}


def resolve_checks(checks) -> list[str]:
    if checks in (None, "all"):
        return list(CHECKS)
    if isinstance(checks, str):
        checks = [checks]
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    return list(checks)


def run_checks(model, checks="all") -> list[CheckResult]:
    """Run the named checks in order.  Ambiguity errors propagate to the caller."""
    out = []
    for name in resolve_checks(checks):
        try:
            out.append(CHECKS[name](model))
        except AmbiguityError:
            raise
        except PreconditionError as exc:
            out.append(CheckResult(name, list(CHECKS).index(name) + 1, False, detail=[f"precondition: {exc}"]))
    return out
