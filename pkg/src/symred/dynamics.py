"""Hamiltonian flows upstairs and on the Hilbert-map image.

Both sides use the same fixed-step classical Runge-Kutta scheme, so the twin
experiment compares like with like.  Conservation is monitored, not enforced.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError
from .groups import (
    FiniteMatrixGroup,
    GroupSpec,
    MomentumMap,
    close_group,
    fixed_subspace,
    group_element_matrices,
    momentum_map,
    to_float,
)
from .invariants import HilbertMap, PoissonStructure, express_in_generators, is_invariant
from .poly import CompiledPolys, Poly
from .symplin import SymplecticSpace, Subspace

DEFECT_TOL = 1e-6
MAX_HALVINGS = 10
DEFECT_STRIDE = 25


@dataclass(eq=False)
class HamiltonianSystem:
    spec: GroupSpec
    h: Poly | Callable
    S: SymplecticSpace | None = None
    grad: Callable | None = None
    F: MomentumMap | None = None
    invariance_residual: float = 0.0

    def __post_init__(self):
        d = self.spec.dim
        if self.S is None:
            self.S = SymplecticSpace.standard(d // 2)
        if self.F is None:
            self.F = momentum_map(self.spec)
        if isinstance(self.h, Poly):
            if self.h.nvars != d:
                raise PreconditionError("Hamiltonian lives in a different number of variables")
            if not is_invariant(self.h, self.spec):
                raise PreconditionError("Hamiltonian is not invariant under the group")
            self._h = CompiledPolys([self.h])
            self._g = CompiledPolys(self.h.gradient())
        else:
            self._h = None
            self._g = None
            self.invariance_residual = self._sampled_invariance()
            if self.invariance_residual > 1e-10:
                raise PreconditionError(f"black-box Hamiltonian is not invariant (residual {self.invariance_residual:.3e})")
        self._omega_inv_T = np.linalg.inv(self.S.omega.T)

    def _sampled_invariance(self, count: int = 100, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        mats = group_element_matrices(self.spec, count, rng)
        worst = 0.0
        for i in range(count):
            g = mats[i % len(mats)]
            v = rng.normal(size=self.spec.dim)
            worst = max(worst, abs(self.energy(g @ v) - self.energy(v)))
        return worst

    def energy(self, v) -> float:
        if self._h is not None:
            return float(self._h(np.asarray(v, dtype=float))[0])
        return float(self.h(np.asarray(v, dtype=float)))

    def energies(self, V: np.ndarray) -> np.ndarray:
        if self._h is not None:
            return self._h(V)[:, 0]
        return np.array([self.energy(v) for v in V])

    def gradient(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self._g is not None:
            return self._g(v)
        if self.grad is not None:
            return np.asarray(self.grad(v), dtype=float)
        eps = 1e-6
        out = np.empty_like(v)
        for i in range(len(v)):
            e = np.zeros_like(v)
            e[i] = eps
            out[i] = (self.energy(v + e) - self.energy(v - e)) / (2 * eps)
        return out

    def vector_field(self, v) -> np.ndarray:
        """X_h with omega(X_h, .) = dh."""
        return self._omega_inv_T @ self.gradient(v)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    stratum_dist: np.ndarray
    dt: float
    halvings: int = 0
    kind: str = "full"
    meta: dict = field(default_factory=dict)

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def to_csv(self, path, stride: int = 1) -> None:
        d = self.states.shape[1]
        k = self.momentum.shape[1]
        names = [f"x{i}" for i in range(1, d + 1)] if self.kind == "full" else [f"y{i}" for i in range(1, d + 1)]
        header = ["t"] + names + ["h"] + [f"F{a}" for a in range(1, k + 1)] + ["stratum_dist"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(0, len(self.times), stride):
                row = [self.times[i], *self.states[i], self.energy[i], *self.momentum[i], self.stratum_dist[i]]
                w.writerow([repr(float(x)) for x in row])


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, y0, T, dt, defect_tol=DEFECT_TOL, max_halvings=MAX_HALVINGS, stride=DEFECT_STRIDE):
    """Fixed-step RK4; every ``stride`` steps a step-doubling defect estimate is taken.

    A defect above ``defect_tol`` restarts the whole run with dt halved.
    """
    if dt == 0 or T <= 0 or abs(dt) > T:
        raise PreconditionError("need 0 < |dt| <= T")
    y0 = np.asarray(y0, dtype=float)
    for halvings in range(max_halvings + 1):
        n = int(round(T / abs(dt)))
        Y = np.empty((n + 1, len(y0)))
        Y[0] = y0
        y = y0
        ok = True
        for i in range(n):
            ynew = _rk4_step(f, y, dt)
            if i % stride == 0:
                half = _rk4_step(f, _rk4_step(f, y, dt / 2), dt / 2)
                defect = float(np.linalg.norm(ynew - half)) * 16.0 / 15.0
                if not np.isfinite(defect) or defect > defect_tol:
                    ok = False
                    break
            y = ynew
            Y[i + 1] = y
        if ok:
            times = np.arange(n + 1) * abs(dt)
            return times, Y, dt, halvings
        dt = dt / 2
    raise PreconditionError(f"step defect above {defect_tol:g} after {max_halvings} halvings")


def integrate_full(sys: HamiltonianSystem, v0, T: float, dt: float, fixed_space: Subspace | None = None,
                   defect_tol: float = DEFECT_TOL) -> Trajectory:
    """Integrate v' = X_h(v) and record energy, momentum and distance to V^H of the start point."""
    v0 = np.asarray(v0, dtype=float)
    if fixed_space is None:
        fixed_space = fixed_subspace(sys.spec, v0)
    times, Y, dt_used, halv = _integrate(sys.vector_field, v0, T, dt, defect_tol)
    mom = sys.F(Y) if sys.F.algebra_dim else np.zeros((len(Y), 0))
    P = fixed_space.projector() if fixed_space.dim else np.zeros((len(v0), len(v0)))
    dist = np.linalg.norm(Y - Y @ P.T, axis=1)
    return Trajectory(times, Y, sys.energies(Y), mom, dist, dt_used, halv, "full")


def check_noether(traj: Trajectory, F: MomentumMap | None = None) -> float:
    """max over t and a of |F_a(gamma(t)) - F_a(gamma(0))|."""
    mom = traj.momentum if F is None else (F(traj.states) if F.algebra_dim else np.zeros((len(traj.states), 0)))
    if mom.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(mom - mom[0])))


def check_stratum_preservation(traj: Trajectory, spec: GroupSpec | None = None, fixed_space: Subspace | None = None) -> float:
    """Largest distance from the trajectory to the fixed space of the start point's isotropy."""
    if fixed_space is None and spec is not None:
        fixed_space = fixed_subspace(spec, traj.states[0])
    if fixed_space is None:
        return float(np.max(traj.stratum_dist))
    P = fixed_space.projector() if fixed_space.dim else np.zeros((traj.states.shape[1],) * 2)
    return float(np.max(np.linalg.norm(traj.states - traj.states @ P.T, axis=1)))


def integrate_reduced(P: PoissonStructure, h_red: Poly, y0, T: float, dt: float,
                      defect_tol: float = DEFECT_TOL) -> Trajectory:
    """Integrate y_i' = sum_j Lambda_ij(y) dh_red/dy_j."""
    if h_red.nvars != P.m:
        raise PreconditionError("reduced Hamiltonian must be a polynomial in y1..ym")
    vf = P.hamiltonian_vector_field(h_red)
    times, Y, dt_used, halv = _integrate(vf, y0, T, dt, defect_tol)
    hc = CompiledPolys([h_red])
    return Trajectory(times, Y, hc(Y)[:, 0], np.zeros((len(Y), 0)), np.full(len(Y), np.nan), dt_used, halv, "reduced")


@dataclass
class TwinResult:
    max_deviation: float
    constant: float
    full: Trajectory
    reduced: Trajectory
    h_red: Poly

    def to_json(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "error_constant": self.constant,
            "h_red": self.h_red.to_text(),
            "energy_drift_full": self.full.energy_drift,
            "energy_drift_reduced": self.reduced.energy_drift,
            "dt": self.full.dt,
        }


def compare_full_vs_reduced(sys: HamiltonianSystem, H: HilbertMap, P: PoissonStructure, v0, T: float, dt: float) -> TwinResult:
    """max_t |p(gamma_full(t)) - gamma_red(t)| with y0 = p(v0)."""
    if not isinstance(sys.h, Poly):
        raise PreconditionError("reduced integration needs a polynomial Hamiltonian")
    h_red = express_in_generators(sys.h, H)
    v0 = np.asarray(v0, dtype=float)
    full = integrate_full(sys, v0, T, dt)
    red = integrate_reduced(P, h_red, H(v0), T, dt)
    n = min(len(full.times), len(red.times))
    if full.dt != red.dt:
        raise PreconditionError("full and reduced runs used different step sizes")
    dev = np.linalg.norm(H(full.states[:n]) - red.states[:n], axis=1)
    mx = float(dev.max())
    return TwinResult(mx, mx / (abs(dt) ** 4 * T), full, red, h_red)


def order_test(sys: HamiltonianSystem, H: HilbertMap, P: PoissonStructure, v0, T: float, dt: float) -> dict:
    """Twin deviation at dt and dt/2; a fourth-order scheme gives a ratio near 16."""
    a = compare_full_vs_reduced(sys, H, P, v0, T, dt).max_deviation
    b = compare_full_vs_reduced(sys, H, P, v0, T, dt / 2).max_deviation
    return {"dt": dt, "deviation_dt": a, "deviation_half": b, "ratio": a / b if b > 0 else float("inf")}


def energy_order_test(sys: HamiltonianSystem, v0, T: float, dt: float) -> dict:
    """Energy drift at dt and dt/2 (reported; for linear flows RK4 drift scales like dt^5)."""
    a = integrate_full(sys, v0, T, dt).energy_drift
    b = integrate_full(sys, v0, T, dt / 2).energy_drift
    return {"dt": dt, "drift_dt": a, "drift_half": b, "ratio": a / b if b > 0 else float("inf")}


def forward_backward(P: PoissonStructure, h_red: Poly, y0, T: float, dt: float) -> float:
    """Integrate forward then backward; the return error bounds non-uniqueness at scheme level."""
    fwd = integrate_reduced(P, h_red, y0, T, dt)
    back = integrate_reduced(P, h_red, fwd.states[-1], T, -dt)
    return float(np.linalg.norm(back.states[-1] - np.asarray(y0, dtype=float)))


def eq_hamilton_residual(traj: Trajectory, H: HilbertMap, P: PoissonStructure, h_red: Poly) -> float:
    """Central-difference d/dt p(gamma) against Lambda(p(gamma)) grad h_red(p(gamma))."""
    Y = H(traj.states)
    dt = traj.times[1] - traj.times[0]
    fd = (Y[2:] - Y[:-2]) / (2 * dt)
    vf = P.hamiltonian_vector_field(h_red)
    rhs = vf(Y[1:-1])
    return float(np.max(np.abs(fd - rhs)))


def orbit_separation_check(spec: FiniteMatrixGroup, H: HilbertMap, samples: int = 50, seed: int = 0,
                           tol: float = 1e-9) -> dict:
    """p(v) = p(w) exactly when w lies in the orbit of v (finite groups, exhaustive orbit test)."""
    if not isinstance(spec, FiniteMatrixGroup):
        raise PreconditionError("exhaustive orbit comparison needs a finite group")
    rng = np.random.default_rng(seed)
    mats = [to_float(g) for g in close_group(spec)]
    agree = 0
    disagree = []
    for i in range(samples):
        v = rng.normal(size=spec.dim)
        if i % 2 == 0:
            w = mats[int(rng.integers(len(mats)))] @ v
        else:
            w = rng.normal(size=spec.dim)
        same_orbit = any(np.linalg.norm(g @ v - w) <= tol * max(1.0, np.linalg.norm(v)) for g in mats)
        same_image = bool(np.linalg.norm(H(v) - H(w)) <= tol * max(1.0, np.linalg.norm(H(v))))
        if same_orbit == same_image:
            agree += 1
        else:
            disagree.append(i)
    return {"samples": samples, "agree": agree, "disagree": disagree}


# --------------------------------------------------------------------------
# cross-section scenario


@dataclass
class CrossSectionReport:
    ell: float
    out_of_plane: float
    L_perp: float
    L_norm_drift: float
    L3_drift: float
    in_interval: bool
    period: float | None
    period_expected: float | None
    period_rel_error: float | None
    radius_drift: float | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _angular_momentum(V: np.ndarray) -> np.ndarray:
    return np.cross(V[:, :3], V[:, 3:])


def _upward_crossings(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    idx = np.nonzero((x[:-1] < 0) & (x[1:] >= 0))[0]
    return t[idx] - x[idx] * (t[idx + 1] - t[idx]) / (x[idx + 1] - x[idx])


def cross_section_scenario(sys: HamiltonianSystem, B_interval: Sequence[float], v0, T: float = 20.0,
                           dt: float = 1e-3, circular: bool = False) -> CrossSectionReport:
    """Central-force flow started in F^{-1}(B) with B a ray segment along e3."""
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (6,):
        raise PreconditionError("the cross-section scenario lives on T*R^3")
    L0 = np.cross(v0[:3], v0[3:])
    lo, hi = B_interval
    ell = float(L0[2])
    if abs(L0[0]) > 1e-12 or abs(L0[1]) > 1e-12:
        raise PreconditionError("initial angular momentum is not along e3")
    if not (lo < ell < hi):
        raise PreconditionError(f"|L| = {ell} is not inside the open interval ({lo}, {hi})")
    traj = integrate_full(sys, v0, T, dt, fixed_space=Subspace(6, np.eye(6)))
    L = _angular_momentum(traj.states)
    out_of_plane = float(np.max(np.abs(traj.states[:, [2, 5]])))
    Lnorm = np.linalg.norm(L, axis=1)
    report = CrossSectionReport(
        ell=ell,
        out_of_plane=out_of_plane,
        L_perp=float(np.max(np.abs(L[:, :2]))),
        L_norm_drift=float(np.max(np.abs(Lnorm - Lnorm[0]))),
        L3_drift=float(np.max(np.abs(L[:, 2] - L[0, 2]))),
        in_interval=bool(np.all((Lnorm > lo) & (Lnorm < hi))),
        period=None,
        period_expected=None,
        period_rel_error=None,
        radius_drift=None,
    )
    if circular:
        # V(s) = s gives q'' = -2 q: circular orbits have angular frequency sqrt(2)
        cross = _upward_crossings(traj.times, traj.states[:, 1])
        if len(cross) >= 2:
            period = float((cross[-1] - cross[0]) / (len(cross) - 1))
            expected = float(np.pi * np.sqrt(2.0))
            report.period = period
            report.period_expected = expected
            report.period_rel_error = abs(period - expected) / expected
        r = np.linalg.norm(traj.states[:, :3], axis=1)
        report.radius_drift = float(np.max(np.abs(r - r[0])))
    return report


def circular_orbit(radius: float) -> np.ndarray:
    """q = (r, 0, 0), p = (0, sqrt(2) r, 0): circular for h = |p|^2/2 + |q|^2."""
    return np.array([radius, 0.0, 0.0, 0.0, np.sqrt(2.0) * radius, 0.0])
