"""Dense LP and convex-QP solvers.

Self-contained implementations sized for the small dense problems this
package generates (support queries, scenario fits, horizon tests, tube MPC
steps): a two-phase primal simplex with Bland's rule and a primal
active-set QP method that accepts warm starts.  Infeasible and unbounded
are ordinary result statuses, not exceptions, because MPC feasibility is
itself an experimental observable here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Status",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "LinearProgram",
    "QuadraticProgram",
    "SolveResult",
    "WarmStart",
    "solve_lp",
    "solve_qp",
    "find_feasible_point",
    "dual_of",
]


@dataclass(frozen=True)
class Tolerances:
    """Central numerical tolerances shared by both solvers."""

    pivot: float = 1e-9          # simplex reduced-cost / ratio threshold
    feasibility: float = 1e-8    # accepted primal residual on Optimal
    qp_stationarity: float = 1e-7
    qp_step: float = 1e-11       # |p| below this counts as a zero step
    lp_max_iter: int = 50_000
    qp_max_iter: int = 5_000


DEFAULT_TOLERANCES = Tolerances()


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


def _as_matrix(a, ncols=None):
    if a is None:
        return np.zeros((0, 0 if ncols is None else ncols))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def _as_vector(v, n=0):
    if v is None:
        return np.zeros(n)
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass
class LinearProgram:
    """min c.x  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq,  lb <= x <= ub.

    Bounds default to free variables; entries may be +-inf.
    """

    c: np.ndarray
    A_ineq: Optional[np.ndarray] = None
    b_ineq: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = _as_vector(self.c)
        n = self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        self.A_ineq = _as_matrix(self.A_ineq, n)
        self.b_ineq = _as_vector(self.b_ineq, self.A_ineq.shape[0])
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.lb = np.full(n, -np.inf) if self.lb is None else _as_vector(self.lb)
        self.ub = np.full(n, np.inf) if self.ub is None else _as_vector(self.ub)
        for name, mat in (("A_ineq", self.A_ineq), ("A_eq", self.A_eq)):
            if mat.shape[1] != n:
                raise ValueError(f"{name} has {mat.shape[1]} columns, expected {n}")
        if self.b_ineq.size != self.A_ineq.shape[0]:
            raise ValueError("b_ineq length does not match A_ineq")
        if self.b_eq.size != self.A_eq.shape[0]:
            raise ValueError("b_eq length does not match A_eq")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors must match the variable count")
        if np.any(self.lb > self.ub):
            raise ValueError("lb > ub for some variable")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class QuadraticProgram:
    """min 0.5 x.H.x + c.x  subject to the same constraint structure."""

    H: np.ndarray
    c: np.ndarray
    A_ineq: Optional[np.ndarray] = None
    b_ineq: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.c = _as_vector(self.c)
        n = self.c.size
        if self.H.shape != (n, n):
            raise ValueError("H must be square and match c")
        if not np.allclose(self.H, self.H.T, atol=1e-12):
            raise ValueError("H must be symmetric (tolerance 1e-12)")
        eig_min = float(np.min(np.linalg.eigvalsh(self.H)))
        if eig_min < -1e-9:
            raise ValueError(f"H must be PSD; smallest eigenvalue {eig_min:.3e}")
        self.A_ineq = _as_matrix(self.A_ineq, n)
        self.b_ineq = _as_vector(self.b_ineq, self.A_ineq.shape[0])
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.lb = np.full(n, -np.inf) if self.lb is None else _as_vector(self.lb)
        self.ub = np.full(n, np.inf) if self.ub is None else _as_vector(self.ub)
        for name, mat in (("A_ineq", self.A_ineq), ("A_eq", self.A_eq)):
            if mat.shape[1] != n:
                raise ValueError(f"{name} has {mat.shape[1]} columns, expected {n}")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.c @ x)


@dataclass
class SolveResult:
    status: Status
    x: Optional[np.ndarray] = None
    objective: float = np.nan
    iterations: int = 0
    active_set: Optional[tuple] = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class WarmStart:
    """Previous solution handed to the QP solver; `active` are row indices
    of the stacked inequality system (general rows first, then lb, then ub
    rows)."""

    x: np.ndarray
    active: tuple = ()


# ---------------------------------------------------------------------------
# simplex


class _Standardised:
    """LP rewritten over nonnegative variables t with rows  A t (<=|=) rhs."""

    __slots__ = ("A_rows", "rhs", "is_eq", "cost", "obj_const", "n_t", "var_map")

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        # variable transform: x_j = const_j + sign_j * t_cols  (split for free)
        var_map = []          # (kind, cols, const) per original variable
        col_of = []           # building columns: list of (orig_j, sign)
        extra_rows = []       # upper-bound rows in t-space: t_col <= val
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo):
                var_map.append(("shift", (len(col_of),), lo))
                col_of.append((j, 1.0))
                if np.isfinite(hi):
                    extra_rows.append((len(col_of) - 1, hi - lo))
            elif np.isfinite(hi):
                var_map.append(("flip", (len(col_of),), hi))
                col_of.append((j, -1.0))
            else:
                var_map.append(("split", (len(col_of), len(col_of) + 1), 0.0))
                col_of.append((j, 1.0))
                col_of.append((j, -1.0))
        n_t = len(col_of)

        def to_t(mat):
            out = np.zeros((mat.shape[0], n_t))
            for k, (j, s) in enumerate(col_of):
                out[:, k] = s * mat[:, j]
            return out

        x_const = np.array([vm[2] for vm in var_map])
        rows_ineq = to_t(lp.A_ineq)
        rhs_ineq = lp.b_ineq - lp.A_ineq @ x_const
        if extra_rows:
            ub_rows = np.zeros((len(extra_rows), n_t))
            ub_rhs = np.empty(len(extra_rows))
            for r, (col, val) in enumerate(extra_rows):
                ub_rows[r, col] = 1.0
                ub_rhs[r] = val
            rows_ineq = np.vstack([rows_ineq, ub_rows])
            rhs_ineq = np.concatenate([rhs_ineq, ub_rhs])
        rows_eq = to_t(lp.A_eq)
        rhs_eq = lp.b_eq - lp.A_eq @ x_const

        self.A_rows = np.vstack([rows_ineq, rows_eq]) if rows_eq.size or rows_ineq.size else np.zeros((0, n_t))
        self.rhs = np.concatenate([rhs_ineq, rhs_eq])
        self.is_eq = np.concatenate(
            [np.zeros(rhs_ineq.size, dtype=bool), np.ones(rhs_eq.size, dtype=bool)]
        )
        self.cost = np.array([s * lp.c[j] for (j, s) in col_of])
        self.obj_const = float(lp.c @ x_const)
        self.n_t = n_t
        self.var_map = var_map

    def back(self, t: np.ndarray) -> np.ndarray:
        x = np.empty(len(self.var_map))
        for j, (kind, cols, const) in enumerate(self.var_map):
            if kind == "shift":
                x[j] = const + t[cols[0]]
            elif kind == "flip":
                x[j] = const - t[cols[0]]
            else:
                x[j] = t[cols[0]] - t[cols[1]]
        return x


def _bland_entering(red: np.ndarray, allowed: np.ndarray, tol: float) -> int:
    cand = np.flatnonzero(allowed & (red < -tol))
    return int(cand[0]) if cand.size else -1


def _bland_leaving(T, basis, col, tol) -> int:
    colvals = T[:-1, col]
    rows = np.flatnonzero(colvals > tol)
    if rows.size == 0:
        return -1
    ratios = T[rows, -1] / colvals[rows]
    rmin = ratios.min()
    ties = rows[ratios <= rmin + 1e-12 * (1.0 + abs(rmin))]
    # Bland: among tied rows pick the one whose basic variable index is least
    return int(ties[np.argmin(basis[ties])])


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    coeffs = T[:, col].copy()
    coeffs[row] = 0.0
    T -= np.outer(coeffs, T[row])
    # remove roundoff in the pivot column
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def _run_simplex(T, basis, allowed, tols) -> tuple[str, int]:
    """Minimise the objective carried in the last tableau row.  Returns
    (outcome, iterations) with outcome in {"optimal", "unbounded", "maxiter"}."""
    it = 0
    while it < tols.lp_max_iter:
        col = _bland_entering(T[-1, :-1], allowed, tols.pivot)
        if col < 0:
            return "optimal", it
        row = _bland_leaving(T, basis, col, tols.pivot)
        if row < 0:
            return "unbounded", it
        _pivot(T, basis, row, col)
        it += 1
    return "maxiter", it


def solve_lp(lp: LinearProgram, tols: Tolerances = DEFAULT_TOLERANCES) -> SolveResult:
    """Two-phase dense simplex with Bland's rule (deterministic).

    Phase 1 uses a single artificial variable for inequality rows and one
    artificial per equality row; phase 2 minimises the original objective.
    """
    std = _Standardised(lp)
    m, n_t = std.A_rows.shape

    if m == 0:
        # only nonnegativity: minimum at t = 0 unless some cost < 0
        if np.any(std.cost < -tols.pivot):
            return SolveResult(Status.UNBOUNDED, message="no constraining rows")
        x = std.back(np.zeros(n_t))
        return SolveResult(Status.OPTIMAL, x=x, objective=float(lp.c @ x))

    # canonical rows: slack per inequality; equality rows get artificials.
    n_ineq = int(np.count_nonzero(~std.is_eq))
    eq_idx = np.flatnonzero(std.is_eq)
    neg_ineq = (~std.is_eq) & (std.rhs < 0)
    need_single = bool(np.any(neg_ineq))
    n_art_eq = eq_idx.size
    n_single = 1 if need_single else 0

    n_cols = n_t + n_ineq + n_single + n_art_eq + 1
    T = np.zeros((m + 1, n_cols))
    T[:-1, :n_t] = std.A_rows
    T[:-1, -1] = std.rhs
    basis = np.full(m, -1, dtype=int)

    slack_col = n_t
    ineq_rows = np.flatnonzero(~std.is_eq)
    for k, r in enumerate(ineq_rows):
        T[r, slack_col + k] = 1.0
        basis[r] = slack_col + k
    single_col = n_t + n_ineq
    if need_single:
        T[np.flatnonzero(neg_ineq), single_col] = -1.0
    art0 = n_t + n_ineq + n_single
    for k, r in enumerate(eq_idx):
        if std.rhs[r] < 0:
            T[r, :] *= -1.0
        T[r, art0 + k] = 1.0
        basis[r] = art0 + k

    total_iters = 0
    art_cols = np.zeros(n_cols - 1, dtype=bool)
    art_cols[single_col: single_col + n_single] = need_single
    art_cols[art0: art0 + n_art_eq] = True

    if need_single or n_art_eq:
        # phase-1 objective: sum of artificials
        T[-1, :] = 0.0
        T[-1, np.flatnonzero(art_cols)] = 1.0
        if need_single:
            # bring the single artificial into the basis at the most
            # negative inequality row, making every RHS nonnegative
            r = int(np.argmin(np.where(neg_ineq, std.rhs, np.inf)))
            _pivot(T, basis, r, single_col)
        for r in eq_idx:  # zero reduced costs of basic artificials
            T[-1, :] -= T[r, :]
        allowed = np.ones(n_cols - 1, dtype=bool)
        outcome, it = _run_simplex(T, basis, allowed, tols)
        total_iters += it
        if outcome == "maxiter":
            return SolveResult(Status.NUMERICAL_FAILURE, iterations=total_iters,
                               message="phase-1 iteration limit")
        phase1_obj = -T[-1, -1]
        if phase1_obj > tols.feasibility:
            return SolveResult(Status.INFEASIBLE, iterations=total_iters,
                               message=f"phase-1 optimum {phase1_obj:.3e}")
        # drive any remaining basic artificials out of the basis
        for r in range(m):
            if art_cols[basis[r]]:
                pivots = np.flatnonzero((~art_cols) & (np.abs(T[r, :-1]) > tols.pivot))
                if pivots.size:
                    _pivot(T, basis, r, int(pivots[0]))
                # else: redundant row; its basic artificial stays at zero

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n_t] = std.cost
    for r in range(m):
        if basis[r] < n_t:
            T[-1, :] -= std.cost[basis[r]] * T[r, :]
        elif art_cols[basis[r]]:
            continue  # zero-valued artificial, zero cost
    allowed = ~art_cols
    outcome, it = _run_simplex(T, basis, allowed, tols)
    total_iters += it
    if outcome == "maxiter":
        return SolveResult(Status.NUMERICAL_FAILURE, iterations=total_iters,
                           message="phase-2 iteration limit")
    if outcome == "unbounded":
        return SolveResult(Status.UNBOUNDED, iterations=total_iters)

    t = np.zeros(n_cols - 1)
    t[basis] = T[:-1, -1]
    x = std.back(t[:n_t])
    resid = _primal_residual(lp, x)
    if resid > tols.feasibility:
        return SolveResult(Status.NUMERICAL_FAILURE, iterations=total_iters,
                           message=f"primal residual {resid:.3e} after optimality")
    return SolveResult(Status.OPTIMAL, x=x, objective=float(lp.c @ x),
                       iterations=total_iters)


def _primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    res = 0.0
    if lp.A_ineq.shape[0]:
        res = max(res, float(np.max(lp.A_ineq @ x - lp.b_ineq, initial=0.0)))
    if lp.A_eq.shape[0]:
        res = max(res, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq), initial=0.0)))
    res = max(res, float(np.max(lp.lb - x, initial=0.0)))
    res = max(res, float(np.max(x - lp.ub, initial=0.0)))
    return res


def find_feasible_point(lp: LinearProgram, tols: Tolerances = DEFAULT_TOLERANCES) -> SolveResult:
    """Feasibility-only solve (objective ignored): phase 1 alone."""
    probe = LinearProgram(
        c=np.zeros(lp.n_vars),
        A_ineq=lp.A_ineq, b_ineq=lp.b_ineq,
        A_eq=lp.A_eq, b_eq=lp.b_eq, lb=lp.lb, ub=lp.ub,
    )
    return solve_lp(probe, tols)


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Dual of   min c.x  s.t.  A x <= b,  x free or x >= 0.

    Returned as a minimisation over multipliers y >= 0:  min b.y subject to
    (A^T y)_j = -c_j on free variables and (A^T y)_j >= -c_j on nonnegative
    ones; strong duality gives primal optimum == -(dual optimum).  Used by
    verification tests; raises for structures outside this subset.
    """
    if lp.A_eq.shape[0]:
        raise ValueError("dual_of supports inequality-only programs")
    if np.any(np.isfinite(lp.ub)):
        raise ValueError("dual_of does not support finite upper bounds")
    free = ~np.isfinite(lp.lb)
    if np.any(np.isfinite(lp.lb) & (lp.lb != 0.0)):
        raise ValueError("dual_of supports lb = 0 or lb = -inf only")
    A, b, c = lp.A_ineq, lp.b_ineq, lp.c
    m = A.shape[0]
    At = A.T
    A_eq = At[free]
    b_eq = -c[free]
    A_ineq = -At[~free]
    b_ineq = c[~free]
    return LinearProgram(c=b.copy(), A_ineq=A_ineq, b_ineq=b_ineq,
                         A_eq=A_eq, b_eq=b_eq, lb=np.zeros(m))


# ---------------------------------------------------------------------------
# active-set QP


def _stack_rows(qp) -> tuple[np.ndarray, np.ndarray]:
    """All inequalities as rows a.x <= rhs: general rows, then finite lb
    (as -x <= -lb), then finite ub."""
    n = qp.n_vars
    rows = [qp.A_ineq]
    rhs = [qp.b_ineq]
    lb_idx = np.flatnonzero(np.isfinite(qp.lb))
    if lb_idx.size:
        E = np.zeros((lb_idx.size, n))
        E[np.arange(lb_idx.size), lb_idx] = -1.0
        rows.append(E)
        rhs.append(-qp.lb[lb_idx])
    ub_idx = np.flatnonzero(np.isfinite(qp.ub))
    if ub_idx.size:
        E = np.zeros((ub_idx.size, n))
        E[np.arange(ub_idx.size), ub_idx] = 1.0
        rows.append(E)
        rhs.append(qp.ub[ub_idx])
    return np.vstack(rows), np.concatenate(rhs)


def _kkt_step(H, g, A_w):
    """Solve  [H A_w^T; A_w 0] [p; lam] = [-g; 0]."""
    n = H.shape[1]
    k = A_w.shape[0]
    KKT = np.zeros((n + k, n + k))
    KKT[:n, :n] = H
    KKT[:n, n:] = A_w.T
    KKT[n:, :n] = A_w
    rhs = np.concatenate([-g, np.zeros(k)])
    scale = 1.0 + float(np.max(np.abs(rhs), initial=0.0))
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)) \
            or np.max(np.abs(KKT @ sol - rhs)) > 1e-6 * scale:
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        if np.max(np.abs(KKT @ sol - rhs)) > 1e-6 * scale:
            return None, None
    return sol[:n], sol[n:]


def solve_qp(qp: QuadraticProgram, tols: Tolerances = DEFAULT_TOLERANCES,
             warm_start: Optional[WarmStart] = None) -> SolveResult:
    """Primal active-set method for convex QPs.

    Strictly convex on the working-set null space is assumed (true for every
    QP this package builds); a singular KKT system that lstsq cannot repair
    reports NumericalFailure.  `warm_start` supplies a candidate point and
    optionally the previous active set; an infeasible candidate falls back
    to an internal phase-1 LP.
    """
    n = qp.n_vars
    rows, rhs = _stack_rows(qp)
    A_eq, b_eq = qp.A_eq, qp.b_eq
    n_eq = A_eq.shape[0]

    def feas_resid(x):
        r = 0.0
        if rows.shape[0]:
            r = max(r, float(np.max(rows @ x - rhs, initial=0.0)))
        if n_eq:
            r = max(r, float(np.max(np.abs(A_eq @ x - b_eq), initial=0.0)))
        return r

    x = None
    working: list[int] = []
    if warm_start is not None:
        xw = np.asarray(warm_start.x, dtype=float)
        if xw.size == n and feas_resid(xw) <= tols.feasibility:
            x = xw.copy()
            if warm_start.active:
                act = rows @ x - rhs
                working = [int(i) for i in warm_start.active
                           if 0 <= i < rows.shape[0] and act[i] >= -tols.feasibility]
                working = _independent_subset(rows, working, A_eq)
    if x is None:
        feas = find_feasible_point(
            LinearProgram(np.zeros(n), rows, rhs, A_eq, b_eq), tols)
        if feas.status is not Status.OPTIMAL:
            status = feas.status if feas.status is Status.INFEASIBLE else Status.NUMERICAL_FAILURE
            return SolveResult(status, iterations=feas.iterations,
                               message="no feasible point: " + feas.message)
        x = feas.x
        working = []

    H, c = qp.H, qp.c
    iters = 0
    while iters < tols.qp_max_iter:
        iters += 1
        A_w = np.vstack([A_eq, rows[working]]) if (n_eq or working) else np.zeros((0, n))
        g = H @ x + c
        p, lam = _kkt_step(H, g, A_w)
        if p is None:
            return SolveResult(Status.NUMERICAL_FAILURE, iterations=iters,
                               message="singular KKT system")
        if np.max(np.abs(p), initial=0.0) <= tols.qp_step * (1.0 + np.max(np.abs(x))):
            lam_ineq = lam[n_eq:] if lam is not None else np.zeros(0)
            if lam_ineq.size == 0 or np.min(lam_ineq) >= -tols.qp_stationarity:
                return SolveResult(Status.OPTIMAL, x=x, objective=qp.objective(x),
                                   iterations=iters, active_set=tuple(working))
            worst = int(np.argmin(lam_ineq))
            working.pop(worst)
            continue
        # step length to the nearest blocking constraint
        mask = np.ones(rows.shape[0], dtype=bool)
        mask[working] = False
        denom = rows[mask] @ p
        idx_all = np.flatnonzero(mask)
        pos = denom > tols.pivot
        alpha, block = 1.0, -1
        if np.any(pos):
            gap = rhs[idx_all[pos]] - rows[idx_all[pos]] @ x
            ratios = np.maximum(gap, 0.0) / denom[pos]
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha = float(ratios[j])
                cand = idx_all[pos]
                near = np.flatnonzero(ratios <= alpha + 1e-12)
                block = int(cand[near.min()])
        x = x + alpha * p
        if block >= 0:
            working.append(block)
    return SolveResult(Status.NUMERICAL_FAILURE, iterations=iters,
                       message="active-set iteration limit")


def _independent_subset(rows: np.ndarray, idx: Sequence[int], A_eq: np.ndarray) -> list[int]:
    """Greedily keep rows that stay linearly independent (with equalities)."""
    kept: list[int] = []
    base = [A_eq] if A_eq.shape[0] else []
    for i in idx:
        trial = np.vstack(base + [rows[kept + [i]]])
        if np.linalg.matrix_rank(trial) == trial.shape[0]:
            kept.append(i)
        if len(kept) + A_eq.shape[0] >= rows.shape[1]:
            break
    return kept
