"""The four bundled models, as configuration dictionaries.

Each builtin is an ordinary config (the same JSON the ``run`` command
reads), so the acceptance runs go through exactly the user-facing path.
"""
from __future__ import annotations

import copy

# so(3) acting on T*R^3 by the same rotation on q and on p; (L_a)_bc = -eps_abc
_L = (
    ((0, 0, 0), (0, 0, -1), (0, 1, 0)),
    ((0, 0, 1), (0, 0, 0), (-1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 0)),
)


def _block_diag(L):
    n = len(L)
    M = [[0] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(n):
            M[i][j] = L[i][j]
            M[n + i][n + j] = L[i][j]
    return M


SO3_BASIS = [_block_diag(L) for L in _L]

KLEIN_GENERATORS = [
    [[-1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]],
    [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]],
]

ALL_CHECKS = "all"

_BUILTINS = {
    "z2_cone": {
        "name": "z2_cone",
        "space": {"dim": 2},
        "group": {"type": "finite", "generators": [[[-1, 0], [0, -1]]]},
        "hamiltonian": "q1^2 + p1^2",
        "seed": 20240501,
        "expect": {
            "generators": ["q1^2", "q1*p1", "p1^2"],
            "poisson_matrix": [["0", "2*y1", "4*y2"], ["-2*y1", "0", "2*y3"], ["-4*y2", "-2*y3", "0"]],
            "relations": ["y1*y3 - y2^2"],
            "strata_dims": [0, 2],
        },
        "tasks": [
            {"type": "invariants"},
            {"type": "strata"},
            {"type": "simulate", "name": "twin", "v0": [0.8, -0.3], "T": 5.0, "dt": 1e-3, "reduced": True},
            {"type": "slice", "samples": 20},
            {"type": "verify", "checks": ALL_CHECKS},
        ],
    },
    "circle_1_-1": {
        "name": "circle_1_-1",
        "space": {"dim": 4},
        "group": {"type": "torus", "weights": [[1, -1]]},
        "hamiltonian": "q1^2 + q2^2 + p1^2 + p2^2",
        "seed": 20240502,
        "expect": {
            "generators": ["q1^2 + p1^2", "q2^2 + p2^2", "q1*q2 - p1*p2", "q1*p2 + q2*p1"],
            "relations": ["y1*y2 - y3^2 - y4^2"],
            "norm_F_squared": "1/4*y1^2 - 1/2*y1*y2 + 1/4*y2^2",
            "strata_dims": [0, 2],
        },
        "tasks": [
            {"type": "invariants"},
            {"type": "strata"},
            {"type": "simulate", "name": "twin", "v0": [0.6, 0.2, -0.1, 0.45], "T": 5.0, "dt": 1e-3, "reduced": True},
            {"type": "slice", "samples": 20},
            {"type": "verify", "checks": ALL_CHECKS},
        ],
    },
    "klein_r4": {
        "name": "klein_r4",
        "space": {"dim": 4},
        "group": {"type": "finite", "generators": KLEIN_GENERATORS},
        # generic invariant quartic (plus quadratic part)
        "hamiltonian": "q1^2 + p1^2 + 2*q2^2 + 3/2*p2^2 + 1/2*q1^2*q2^2 + 1/3*q1*p1*q2*p2 + 1/4*p1^4 + 1/5*q2^4",
        "seed": 20240503,
        "expect": {"candidate_classes": 5, "strata_dims": [0, 2, 2, 4]},
        "tasks": [
            {"type": "invariants"},
            {"type": "strata"},
            {"type": "simulate", "name": "fixed_plane", "v0": [0.0, 0.7, 0.0, -0.4], "T": 10.0, "dt": 1e-3},
            {"type": "slice", "samples": 20},
            {"type": "verify", "checks": ALL_CHECKS},
        ],
    },
    "so3_central_force": {
        "name": "so3_central_force",
        "space": {"dim": 6},
        "group": {"type": "lie_algebra", "basis": SO3_BASIS},
        "hamiltonian": "builtin:central_force",
        "seed": 20240504,
        "expect": {"norm_F_squared": "y1*y3 - y2^2", "strata_dims": [0, 2]},
        "tasks": [
            {"type": "invariants"},
            {"type": "strata"},
            {"type": "simulate", "name": "central", "v0": [1.0, 0.2, -0.3, 0.1, 0.9, 0.4], "T": 10.0, "dt": 1e-3},
            {"type": "simulate", "name": "cross_section", "v0": [1.0, 0.0, 0.0, 0.0, 1.4142135623730951, 0.0],
             "T": 20.0, "dt": 1e-3, "cross_section": [0.5, 3.0], "circular": True},
            {"type": "slice", "samples": 20},
            {"type": "verify", "checks": ALL_CHECKS},
        ],
    },
}

# named Hamiltonians usable as "builtin:<name>"; texts in coordinates q1..qn, p1..pn
BUILTIN_HAMILTONIANS = {
    # 1/2 |p|^2 + V(|q|^2) with V(s) = s
    "central_force": lambda n: " + ".join([f"1/2*p{i}^2" for i in range(1, n + 1)] + [f"q{i}^2" for i in range(1, n + 1)]),
    "harmonic": lambda n: " + ".join([f"1/2*q{i}^2" for i in range(1, n + 1)] + [f"1/2*p{i}^2" for i in range(1, n + 1)]),
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin_config(name: str) -> dict:
    if name not in _BUILTINS:
        raise KeyError(f"unknown builtin {name!r}; available: {', '.join(_BUILTINS)}")
    return copy.deepcopy(_BUILTINS[name])
