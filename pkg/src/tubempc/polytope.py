"""Halfspace-representation polytope algebra.

Every set here is {x : V x <= b} with facet-normal rows V and offsets b.
Support values, containment, scaling, translation, 2-D area, and a
template-based robust-positively-invariant set construction; support
queries are one LP per direction and everything else builds on them.
All values are immutable after construction and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from tubempc.solver import DEFAULT_TOLERANCES, LinearProgram, Status, solve_lp

__all__ = [
    "TOL_SET",
    "HPolytope",
    "SupportVector",
    "support",
    "contains",
    "scale_hetero",
    "translate",
    "vertices_2d",
    "area_2d",
    "bounding_box",
    "default_template",
    "invariant_set",
]

# absolute tolerance for all containment / invariance verifications: well
# above the LP solver tolerance (1e-9), well below problem scales
TOL_SET = 1e-8


@dataclass(frozen=True)
class SupportVector:
    """Support values h_P(d) = max_{x in P} d.x, one entry per direction."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise ValueError("support values must be finite (set unbounded?)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size


class HPolytope:
    """Nonempty bounded polytope {x : V x <= b}.

    Construction validates nonemptiness (Chebyshev LP) and boundedness
    (finite support along every coordinate direction) unless the caller
    guarantees them with ``validate=False`` (used internally for
    operations that preserve both invariants).  Degenerate sets with empty
    interior (down to single points) are legal values and flagged via
    :attr:`is_degenerate`.
    """

    __slots__ = ("V", "b", "_cheb_radius", "_bbox")

    def __init__(self, V, b, validate: bool = True):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if V.shape[0] != b.size:
            raise ValueError(f"V has {V.shape[0]} rows but b has {b.size} entries")
        norms = np.linalg.norm(V, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("zero rows in V are not allowed")
        V.setflags(write=False)
        b.setflags(write=False)
        self.V = V
        self.b = b
        self._cheb_radius: Optional[float] = None
        self._bbox = None
        if validate:
            self._validate()

    # -- invariants ---------------------------------------------------

    def _validate(self):
        r = self.chebyshev_radius
        if r < -TOL_SET:
            raise ValueError(f"polytope is empty (inradius {r:.3e})")
        for j in range(self.n_dim):
            d = np.zeros(self.n_dim)
            for sgn in (1.0, -1.0):
                d[j] = sgn
                res = _support_lp(self, d)
                if res.status is Status.UNBOUNDED:
                    raise ValueError(
                        f"polytope unbounded along coordinate {j} (sign {sgn:+.0f})")
                if res.status is not Status.OPTIMAL:
                    raise ValueError(f"boundedness check failed: {res.status}")
            d[j] = 0.0

    @property
    def n_dim(self) -> int:
        return self.V.shape[1]

    @property
    def n_rows(self) -> int:
        return self.V.shape[0]

    @property
    def chebyshev_radius(self) -> float:
        """Inradius; negative means empty, ~0 means degenerate."""
        if self._cheb_radius is None:
            norms = np.linalg.norm(self.V, axis=1)
            A = np.hstack([self.V, norms[:, None]])
            c = np.zeros(self.n_dim + 1)
            c[-1] = -1.0
            ub = np.full(self.n_dim + 1, np.inf)
            ub[-1] = 1.0 + np.max(np.abs(self.b))  # keeps the LP bounded
            res = solve_lp(LinearProgram(c=c, A_ineq=A, b_ineq=self.b, ub=ub))
            if res.status is not Status.OPTIMAL:
                raise RuntimeError(f"Chebyshev LP returned {res.status}")
            self._cheb_radius = float(-res.objective)
        return self._cheb_radius

    @property
    def is_degenerate(self) -> bool:
        return self.chebyshev_radius <= TOL_SET

    def contains_point(self, x, tol: float = TOL_SET) -> bool:
        return bool(np.all(self.V @ np.asarray(x, dtype=float) <= self.b + tol))

    # -- constructors -------------------------------------------------

    @classmethod
    def box(cls, lb, ub) -> "HPolytope":
        lb = np.asarray(lb, dtype=float).reshape(-1)
        ub = np.asarray(ub, dtype=float).reshape(-1)
        n = lb.size
        V = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([ub, -lb])
        return cls(V, b, validate=False)

    @classmethod
    def unit_box(cls, n: int, radius: float = 1.0) -> "HPolytope":
        return cls.box(-radius * np.ones(n), radius * np.ones(n))

    @classmethod
    def regular_polygon(cls, n_facets: int, inradius: float = 1.0,
                        phase: float = 0.0) -> "HPolytope":
        """2-D polygon with facets at evenly spaced angles, in unit-offset
        form (rows scaled by 1/inradius, b = 1)."""
        if inradius <= 0:
            raise ValueError("inradius must be positive")
        ang = phase + 2.0 * np.pi * np.arange(n_facets) / n_facets
        V = np.column_stack([np.cos(ang), np.sin(ang)]) / inradius
        return cls(V, np.ones(n_facets), validate=False)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "HPolytope":
        return cls(np.array([[1.0], [-1.0]]), np.array([hi, -lo]), validate=False)

    # -- serialisation ------------------------------------------------

    def to_dict(self) -> dict:
        return {"V": self.V.tolist(), "b": self.b.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "HPolytope":
        return cls(np.asarray(d["V"], dtype=float),
                   np.asarray(d["b"], dtype=float), validate=validate)

    @classmethod
    def from_json(cls, s: str) -> "HPolytope":
        return cls.from_dict(json.loads(s))

    def __repr__(self):
        return f"HPolytope({self.n_rows} facets in R^{self.n_dim})"


def _support_lp(P: HPolytope, d: np.ndarray):
    return solve_lp(LinearProgram(c=-np.asarray(d, dtype=float),
                                  A_ineq=P.V, b_ineq=P.b))


def support(P: HPolytope, D) -> SupportVector:
    """Support values of P along each row of D, one LP per row."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape[1] != P.n_dim:
        raise ValueError(f"directions have {D.shape[1]} columns, set is {P.n_dim}-D")
    vals = np.empty(D.shape[0])
    for j, d in enumerate(D):
        res = _support_lp(P, d)
        if res.status is Status.UNBOUNDED:
            raise ValueError(f"set unbounded along direction {j}")
        if res.status is Status.INFEASIBLE:
            raise ValueError("empty polytope in support query")
        if res.status is not Status.OPTIMAL:
            raise RuntimeError(f"support LP failed: {res.message}")
        vals[j] = -res.objective
    return SupportVector(vals)


def contains(P: HPolytope, Q: HPolytope, tol: float = TOL_SET) -> bool:
    """True iff Q is a subset of P (support of Q under P's normals)."""
    if P.n_dim != Q.n_dim:
        raise ValueError("dimension mismatch")
    return bool(np.all(support(Q, P.V).values <= P.b + tol))


def scale_hetero(P: HPolytope, theta) -> HPolytope:
    """Heterogeneous facet scaling {x : V x <= theta} of a unit-offset set."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not np.allclose(P.b, 1.0, atol=1e-12):
        raise ValueError("scale_hetero requires unit facet offsets (b = 1)")
    if theta.size != P.n_rows:
        raise ValueError("theta length must match the facet count")
    if np.any(theta < -1e-12) or np.any(theta > 1.0 + 1e-12):
        raise ValueError("theta entries must lie in [0, 1]")
    return HPolytope(P.V, np.clip(theta, 0.0, 1.0), validate=False)


def translate(P: HPolytope, t) -> HPolytope:
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size != P.n_dim:
        raise ValueError("translation dimension mismatch")
    return HPolytope(P.V, P.b + P.V @ t, validate=False)


def bounding_box(P: HPolytope) -> tuple[np.ndarray, np.ndarray]:
    """(lower, upper) axis-aligned bounds from support queries (cached)."""
    if P._bbox is None:
        n = P.n_dim
        hi = support(P, np.eye(n)).values
        lo = -support(P, -np.eye(n)).values
        P._bbox = (lo, hi)
    return P._bbox


def vertices_2d(P: HPolytope, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a 2-D polytope by pairwise facet intersection,
    feasibility filtering, and counterclockwise angular sort."""
    if P.n_dim != 2:
        raise ValueError("vertex enumeration implemented for 2-D only")
    V, b = P.V, P.b
    scale = 1.0 + float(np.max(np.abs(b)))
    pts = []
    m = P.n_rows
    for i in range(m):
        for j in range(i + 1, m):
            M = V[[i, j]]
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            x = np.linalg.solve(M, b[[i, j]])
            if np.all(V @ x <= b + tol * scale):
                pts.append(x)
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    uniq: list[np.ndarray] = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= 1e-9 * scale for q in uniq):
            uniq.append(p)
    uniq = np.array(uniq)
    centre = uniq.mean(axis=0)
    order = np.argsort(np.arctan2(uniq[:, 1] - centre[1], uniq[:, 0] - centre[0]))
    return uniq[order]


def area_2d(P: HPolytope) -> float:
    """Exact polygon area (shoelace over enumerated vertices)."""
    verts = vertices_2d(P)
    if verts.shape[0] < 3:
        return 0.0
    x, y = verts[:, 0], verts[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def default_template(V_w: np.ndarray, Phi: np.ndarray, depth: int = 2) -> np.ndarray:
    """Template rows V_w, V_w Phi, ..., V_w Phi^depth, normalised and
    deduplicated."""
    V_w = np.atleast_2d(np.asarray(V_w, dtype=float))
    Phi = np.asarray(Phi, dtype=float)
    rows = []
    cur = V_w.copy()
    for _ in range(depth + 1):
        rows.append(cur)
        cur = cur @ Phi
    T = np.vstack(rows)
    norms = np.linalg.norm(T, axis=1)
    T = T[norms > 1e-10] / norms[norms > 1e-10, None]
    uniq: list[np.ndarray] = []
    for r in T:
        if not any(np.linalg.norm(r - u) <= 1e-9 for u in uniq):
            uniq.append(r)
    return np.array(uniq)


def invariant_set(Phi: np.ndarray, W: HPolytope,
                  template: Optional[np.ndarray] = None,
                  max_iter: int = 2000, tol: float = 1e-9,
                  margin: float = 0.0) -> HPolytope:
    """Robust positively invariant set S with Phi S + W inside S.

    Template-based value iteration: offsets follow
    b_{t+1} = support(S_t, T Phi) + support(W, T) from b_0 = support(W, T)
    until a fixed point, then rows are normalised to unit offsets.  The
    invariance property is re-verified on the result and a failure raises
    rather than returning a non-invariant set.

    The fixed point satisfies the invariance condition with equality along
    template directions; ``margin > 0`` runs the iteration against the
    inflated set (1+margin) W so the returned S is invariant for W with
    strict slack (useful for closed-loop batteries near constraints).
    """
    Phi = np.asarray(Phi, dtype=float)
    rho = float(np.max(np.abs(np.linalg.eigvals(Phi))))
    if rho >= 1.0:
        raise ValueError(f"closed-loop matrix must be strictly stable (rho={rho:.4f})")
    if template is None:
        template = default_template(W.V, Phi)
    T = np.atleast_2d(np.asarray(template, dtype=float))
    if T.shape[1] != W.n_dim:
        raise ValueError("template dimension mismatch")
    if margin < 0:
        raise ValueError("margin must be nonnegative")

    w_sup = (1.0 + margin) * support(W, T).values
    b = w_sup.copy()
    # first candidate validates template richness (bounded or raises)
    S_t = HPolytope(T, np.maximum(b, 1e-15))
    T_phi = T @ Phi
    converged = False
    for _ in range(max_iter):
        e_sup = support(S_t, T_phi).values
        b_next = e_sup + w_sup
        if np.max(np.abs(b_next - b) / np.maximum(np.abs(b), 1e-12)) <= tol:
            b = b_next
            converged = True
            break
        b = b_next
        S_t = HPolytope(T, b, validate=False)
    if not converged:
        raise RuntimeError(
            "invariant-set iteration did not converge within "
            f"{max_iter} iterations; enrich the template (e.g. append "
            "template@Phi, template@Phi^2 rows) or check the stability margin")
    if np.any(b <= TOL_SET):
        raise ValueError(
            "invariant set is degenerate along a template row; supply a "
            "full-dimensional disturbance set or a different template")
    V_s = T / b[:, None]
    S = HPolytope(V_s, np.ones(T.shape[0]), validate=False)
    resid = support(S, V_s @ Phi).values + support(W, V_s).values
    if np.any(resid > 1.0 + TOL_SET):
        raise RuntimeError(
            f"invariance verification failed (max residual {np.max(resid):.3e}); "
            "not returning a non-invariant set")
    return S
