"""Online disturbance-set learning.

The learned set scales a conservative base polytope W = {w : V_w w <= 1}
heterogeneously and recentres it:

    W(v, theta, rho) = {w : V_w w <= theta} + (1 - rho) v

with v in W, theta in [0,1]^{n_v}, rho in [0,1], theta <= rho*1.  Fitting
minimises 1.theta + rho subject to sample coverage; the bilinear rho*v term
is removed by the substitution y = (1 - rho) v, which turns both the batch
fit and the online update into small LPs.  The per-sample coverage rows
share a right-hand side, so they are compressed exactly to their
elementwise maximum before solving; the feasible set is unchanged.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from math import ceil, e, log
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from tubempc.polytope import TOL_SET, HPolytope
from tubempc.solver import DEFAULT_TOLERANCES, LinearProgram, Status, Tolerances, solve_lp

__all__ = [
    "ModelMismatchWarning",
    "LearnedSet",
    "InformationSet",
    "ScenarioBound",
    "fit_initial",
    "update",
    "realise",
    "required_samples",
    "epsilon_for",
    "violation_rate",
]

_VALID_SLACK = 1e-7  # accepted LP-noise on parameter bounds


class ModelMismatchWarning(UserWarning):
    """A measured disturbance fell outside the conservative set W: the
    modelling assumption is broken and the experiment configuration needs
    attention.  The offending sample is excluded from the fit."""


@dataclass(frozen=True)
class LearnedSet:
    """Immutable parameters (v, theta, rho) over a base polytope."""

    base: HPolytope
    v: np.ndarray
    theta: np.ndarray
    rho: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(-1)
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        rho = float(self.rho)
        if not np.allclose(self.base.b, 1.0, atol=1e-12):
            raise ValueError("learned sets require a unit-offset base (b = 1)")
        if v.size != self.base.n_dim or theta.size != self.base.n_rows:
            raise ValueError("parameter dimensions do not match the base polytope")
        if np.any(theta < -_VALID_SLACK) or np.any(theta > 1.0 + _VALID_SLACK):
            raise ValueError("theta outside [0, 1]")
        if rho < -_VALID_SLACK or rho > 1.0 + _VALID_SLACK:
            raise ValueError("rho outside [0, 1]")
        theta = np.clip(theta, 0.0, 1.0)
        rho = min(max(rho, 0.0), 1.0)
        if np.any(theta > rho + TOL_SET):
            raise ValueError("theta <= rho * 1 violated")
        if np.any(self.base.V @ v > 1.0 + _VALID_SLACK):
            raise ValueError("centre v lies outside the base set")
        offs = theta + (1.0 - rho) * (self.base.V @ v)
        if np.any(offs > 1.0 + _VALID_SLACK):
            raise ValueError("realisation exceeds the base set")
        v.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "rho", rho)

    @property
    def offsets(self) -> np.ndarray:
        """Facet offsets theta + (1 - rho) V_w v of the realisation."""
        return self.theta + (1.0 - self.rho) * (self.base.V @ self.v)

    def realise(self) -> HPolytope:
        return HPolytope(self.base.V, self.offsets, validate=False)

    def contains_sample(self, w, tol: float = TOL_SET) -> bool:
        return bool(np.all(self.base.V @ np.asarray(w, dtype=float)
                           <= self.offsets + tol))

    def to_dict(self) -> dict:
        return {"v": self.v.tolist(), "theta": self.theta.tolist(),
                "rho": float(self.rho)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, base: HPolytope) -> "LearnedSet":
        return cls(base=base, v=np.asarray(d["v"], dtype=float),
                   theta=np.asarray(d["theta"], dtype=float), rho=float(d["rho"]))

    @classmethod
    def full(cls, base: HPolytope) -> "LearnedSet":
        """The whole base set W (theta = 1, rho = 1)."""
        return cls(base=base, v=np.zeros(base.n_dim),
                   theta=np.ones(base.n_rows), rho=1.0)


def realise(ls: LearnedSet) -> HPolytope:
    """Halfspace form {w : V_w w <= theta + (1 - rho) V_w v}."""
    return ls.realise()


class InformationSet:
    """Ordered record of measured disturbances (unbounded append).

    Samples outside the base set are kept for diagnostics but tracked in
    :attr:`violations`; they break the conservative-bound assumption and a
    ModelMismatchWarning is emitted when they enter."""

    def __init__(self, base: HPolytope, samples: Optional[Iterable] = None):
        self.base = base
        self.samples: list[np.ndarray] = []
        self.violations: list[int] = []
        for w in samples if samples is not None else ():
            self.add(w)

    def add(self, w) -> bool:
        """Append a sample; returns True when it lies in the base set."""
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.size != self.base.n_dim:
            raise ValueError("sample dimension mismatch")
        idx = len(self.samples)
        self.samples.append(w)
        ok = bool(np.all(self.base.V @ w <= 1.0 + TOL_SET))
        if not ok:
            self.violations.append(idx)
            warnings.warn(
                f"sample {idx} lies outside the conservative set "
                f"(max facet excess {np.max(self.base.V @ w - 1.0):.3e})",
                ModelMismatchWarning, stacklevel=2)
        return ok

    def in_model(self) -> np.ndarray:
        """(m, n) array of the samples inside the base set."""
        bad = set(self.violations)
        rows = [w for i, w in enumerate(self.samples) if i not in bad]
        return np.array(rows) if rows else np.zeros((0, self.base.n_dim))

    def __len__(self):
        return len(self.samples)

    def to_csv(self, path) -> None:
        arr = np.array(self.samples) if self.samples else np.zeros((0, self.base.n_dim))
        np.savetxt(path, arr, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, base: HPolytope) -> "InformationSet":
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(base, arr)


@dataclass(frozen=True)
class ScenarioBound:
    """Sample-complexity record: required_samples guarantees violation
    probability <= epsilon with confidence 1 - delta."""

    epsilon: float
    delta: float
    required_samples: int


def required_samples(epsilon: float, delta: float, n_x: int, n_v: int) -> ScenarioBound:
    _check_prob("epsilon", epsilon)
    _check_prob("delta", delta)
    raw = (1.0 / epsilon) * (e / (e - 1.0)) * (n_x + n_v + log(1.0 / delta))
    return ScenarioBound(epsilon=epsilon, delta=delta, required_samples=ceil(raw))


def epsilon_for(n_samples: int, delta: float, n_x: int, n_v: int) -> float:
    """Violation level guaranteed (with confidence 1 - delta) by a given
    offline sample count; inverse of :func:`required_samples`."""
    _check_prob("delta", delta)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    return (1.0 / n_samples) * (e / (e - 1.0)) * (n_x + n_v + log(1.0 / delta))


def _check_prob(name: str, val: float) -> None:
    if not 0.0 < val < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {val}")


def _solve_parameter_lp(base: HPolytope, g: np.ndarray, rigid: bool,
                        tols: Tolerances) -> tuple[np.ndarray, np.ndarray, float]:
    """min 1.theta + rho  s.t.  g <= theta + V_w y,  V_w y <= (1-rho) 1,
    theta in [0,1]^{n_v}, rho in [0,1], theta <= rho 1 (y = (1-rho) v)."""
    Vw = base.V
    n_v, n_x = Vw.shape
    n = n_x + n_v + 1  # columns: y, theta, rho
    c = np.concatenate([np.zeros(n_x), np.ones(n_v), [1.0]])
    A = np.zeros((3 * n_v, n))
    rhs = np.empty(3 * n_v)
    A[:n_v, :n_x] = -Vw
    A[:n_v, n_x:n_x + n_v] = -np.eye(n_v)
    rhs[:n_v] = -g
    A[n_v:2 * n_v, :n_x] = Vw
    A[n_v:2 * n_v, -1] = 1.0
    rhs[n_v:2 * n_v] = 1.0
    A[2 * n_v:, n_x:n_x + n_v] = np.eye(n_v)
    A[2 * n_v:, -1] = -1.0
    rhs[2 * n_v:] = 0.0
    lb = np.concatenate([np.full(n_x, -np.inf), np.zeros(n_v), [0.0]])
    ub = np.concatenate([np.full(n_x, np.inf), np.ones(n_v), [1.0]])
    A_eq = b_eq = None
    if rigid:
        A_eq = np.zeros((n_v, n))
        A_eq[:, n_x:n_x + n_v] = np.eye(n_v)
        A_eq[:, -1] = -1.0
        b_eq = np.zeros(n_v)
    res = solve_lp(LinearProgram(c=c, A_ineq=A, b_ineq=rhs, A_eq=A_eq,
                                 b_eq=b_eq, lb=lb, ub=ub), tols)
    if res.status is Status.INFEASIBLE:
        raise ValueError(
            "scenario LP infeasible: some required offset exceeds the "
            "conservative set (model mismatch)")
    if res.status is not Status.OPTIMAL:
        raise RuntimeError(f"scenario LP failed: {res.status} {res.message}")
    y = res.x[:n_x]
    theta = res.x[n_x:n_x + n_v]
    rho = float(res.x[-1])
    return y, theta, rho


def _recover(base: HPolytope, y: np.ndarray, theta: np.ndarray, rho: float) -> LearnedSet:
    # rho -> 1 forces y -> 0, so the division is safe away from that branch
    if abs(1.0 - rho) <= 1e-9:
        v = np.zeros(base.n_dim)
        rho = 1.0
    else:
        v = y / (1.0 - rho)
    return LearnedSet(base=base, v=v, theta=theta, rho=rho)


def _coverage_vector(base: HPolytope, samples: np.ndarray) -> np.ndarray:
    """Elementwise max of V_w w over the samples (exact constraint
    compression: all coverage rows share the same right-hand side)."""
    return np.max(samples @ base.V.T, axis=0)


def fit_initial(base: HPolytope, samples, rigid: bool = False,
                tols: Tolerances = DEFAULT_TOLERANCES) -> LearnedSet:
    """Batch scenario fit of the learned set to offline samples.

    Samples outside the base set are excluded with a ModelMismatchWarning
    instead of making the LP infeasible.  ``rigid=True`` adds the equality
    family theta = rho*1 (uniform-scaling special case).
    """
    if isinstance(samples, InformationSet):
        arr = samples.in_model()
    else:
        arr = np.atleast_2d(np.asarray(samples, dtype=float))
        ok = np.all(arr @ base.V.T <= 1.0 + TOL_SET, axis=1)
        if not np.all(ok):
            warnings.warn(
                f"{int(np.sum(~ok))} sample(s) outside the conservative set "
                "excluded from the fit", ModelMismatchWarning, stacklevel=2)
        arr = arr[ok]
    if arr.shape[0] == 0:
        raise ValueError("no usable samples to fit")
    if arr.shape[1] != base.n_dim:
        raise ValueError("sample dimension mismatch")
    g = _coverage_vector(base, arr)
    y, theta, rho = _solve_parameter_lp(base, g, rigid, tols)
    return _recover(base, y, theta, rho)


def update(prev: LearnedSet, w_new, rigid: bool = False,
           tols: Tolerances = DEFAULT_TOLERANCES) -> LearnedSet:
    """One online step: smallest parameterised set that dominates the
    previous realisation and covers the newest disturbance.

    Constant-size LP regardless of how many samples came before; the
    dominance constraint keeps the sets nested."""
    w = np.asarray(w_new, dtype=float).reshape(-1)
    if w.size != prev.base.n_dim:
        raise ValueError("sample dimension mismatch")
    g = prev.offsets
    if np.all(prev.base.V @ w <= 1.0 + TOL_SET):
        g = np.maximum(g, prev.base.V @ w)
    else:
        warnings.warn(
            f"online sample outside the conservative set "
            f"(max facet excess {np.max(prev.base.V @ w - 1.0):.3e}); "
            "excluded from the update", ModelMismatchWarning, stacklevel=2)
    y, theta, rho = _solve_parameter_lp(prev.base, g, rigid, tols)
    return _recover(prev.base, y, theta, rho)


def violation_rate(ls: LearnedSet, samples) -> float:
    """Empirical fraction of samples outside the realisation."""
    arr = np.atleast_2d(np.asarray(samples, dtype=float))
    if arr.shape[0] == 0:
        raise ValueError("empty sample set")
    inside = np.all(arr @ ls.base.V.T <= ls.offsets + 1e-9, axis=1)
    return float(1.0 - inside.mean())
