"""Homothetic tube MPC.

Prediction-matrix assembly, tube parameters, the finite constraint horizon
that makes infinitely many predicted constraints equivalent to a finite
set, and construction/solution of the tube MPC quadratic program in
homothetic and rigid forms.

Conventions: the decision vector is z = [s0; c] stacked with the tube
scalings alpha in the homothetic problem; the applied input is
u = K x + c_0; alpha_i = 1 for every i >= N is a fixed convention, not a
variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_discrete_are, solve_discrete_lyapunov

from tubempc.learner import LearnedSet
from tubempc.polytope import TOL_SET, HPolytope, support
from tubempc.solver import (
    DEFAULT_TOLERANCES,
    LinearProgram,
    QuadraticProgram,
    SolveResult,
    Status,
    Tolerances,
    WarmStart,
    solve_lp,
    solve_qp,
)

__all__ = [
    "PlantModel",
    "CostWeights",
    "TubeData",
    "MpcSolution",
    "MpcWorkspace",
    "assemble",
    "compute_horizon",
    "verify_horizon_tail",
    "horizon_sequence",
    "build_qp",
    "solve_step",
    "is_feasible",
    "expand_trajectory",
]


@dataclass
class PlantModel:
    """x+ = A x + B u + w with mixed constraints F x + G u <= 1 and a fixed
    stabilising feedback u = K x + c."""

    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    G: np.ndarray
    K: np.ndarray
    Phi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        n_x, n_u = self.B.shape
        if self.A.shape != (n_x, n_x):
            raise ValueError("A must be square and match B")
        if self.K.shape != (n_u, n_x):
            raise ValueError(f"K must be {n_u}x{n_x}")
        if self.F.shape[1] != n_x or self.G.shape[1] != n_u \
                or self.F.shape[0] != self.G.shape[0]:
            raise ValueError("F and G must share rows and match state/input sizes")
        self.Phi = self.A + self.B @ self.K
        rho = float(np.max(np.abs(np.linalg.eigvals(self.Phi))))
        if rho >= 1.0:
            raise ValueError(f"A + B K must be strictly stable (rho={rho:.4f})")

    @property
    def n_x(self) -> int:
        return self.B.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_c(self) -> int:
        return self.F.shape[0]

    @classmethod
    def with_lqr(cls, A, B, F, G, Q=None, R=None) -> "PlantModel":
        """Discrete LQR feedback for (A, B); Q, R default to identities."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        Q = np.eye(A.shape[0]) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
        R = np.eye(B.shape[1]) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
        P = solve_discrete_are(A, B, Q, R)
        K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        return cls(A=A, B=B, F=F, G=G, K=K)


@dataclass
class CostWeights:
    """J = |s0|^2_Px + |c|^2_Pc + q_alpha * sum_i (alpha_i - 1)^2."""

    Px: np.ndarray
    Pc: np.ndarray
    q_alpha: float = 1.0

    def __post_init__(self):
        self.Px = np.atleast_2d(np.asarray(self.Px, dtype=float))
        self.Pc = np.atleast_2d(np.asarray(self.Pc, dtype=float))
        self.q_alpha = float(self.q_alpha)
        if self.q_alpha <= 0:
            raise ValueError("q_alpha must be positive")
        for name, M in (("Px", self.Px), ("Pc", self.Pc)):
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            if float(np.min(np.linalg.eigvalsh(M))) < -1e-9:
                raise ValueError(f"{name} must be PSD")

    @classmethod
    def defaults_for(cls, plant: PlantModel, N: int, Q=None, R=None,
                     q_alpha: float = 1.0) -> "CostWeights":
        """Px from the closed-loop cost-to-go Lyapunov equation, Pc block
        diagonal with the matching input weight."""
        Q = np.eye(plant.n_x) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
        R = np.eye(plant.n_u) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
        Qbar = Q + plant.K.T @ R @ plant.K
        Px = solve_discrete_lyapunov(plant.Phi.T, Qbar)
        Pc_block = R + plant.B.T @ Px @ plant.B
        Pc = np.kron(np.eye(N), Pc_block)
        return cls(Px=Px, Pc=Pc, q_alpha=q_alpha)


class TubeData:
    """Precomputed tube artifacts shared by every controller step.

    Immutable after assembly apart from the constraint horizon ``nu``
    (computed separately) and an internal cache of the stacked prediction
    matrices Fbar @ Psi^i.
    """

    def __init__(self, S: HPolytope, N: int, e_max: np.ndarray, h: np.ndarray,
                 Fbar: np.ndarray, Psi: np.ndarray, plant: PlantModel):
        self.S = S
        self.N = int(N)
        self.e_max = np.asarray(e_max, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.Fbar = Fbar
        self.Psi = Psi
        self.plant = plant
        self.nu: Optional[int] = None
        self._powers: list[np.ndarray] = [Fbar.copy()]
        self._qp_cache: dict = {}

    @property
    def n_s(self) -> int:
        return self.S.n_rows

    @property
    def n_z(self) -> int:
        return self.Fbar.shape[1]

    def fbar_power(self, i: int) -> np.ndarray:
        """Fbar @ Psi^i with caching."""
        while len(self._powers) <= i:
            self._powers.append(self._powers[-1] @ self.Psi)
        return self._powers[i]

    def with_horizon(self, nu: int) -> "TubeData":
        self.nu = int(nu)
        return self


def assemble(plant: PlantModel, S: HPolytope, N: int,
             conservative: Optional[HPolytope] = None) -> TubeData:
    """Fill tube quantities e_max, h and the stacked matrices Fbar, Psi.

    When the conservative disturbance set is supplied, the invariance
    precondition Phi S + W inside S is re-verified (support form) before
    anything else is built.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    n_x, n_u, n_c = plant.n_x, plant.n_u, plant.n_c
    if S.n_dim != n_x:
        raise ValueError("tube cross-section dimension mismatch")
    e_max = support(S, S.V @ plant.Phi).values
    if conservative is not None:
        w_max = support(conservative, S.V).values
        if np.any(e_max + w_max > 1.0 + TOL_SET):
            raise ValueError(
                "S fails the invariance verification against the conservative "
                f"set (max residual {np.max(e_max + w_max - 1.0):.3e})")
    FGK = plant.F + plant.G @ plant.K
    h = support(S, FGK).values
    E = np.zeros((n_u, N * n_u))
    E[:, :n_u] = np.eye(n_u)
    M = np.zeros((N * n_u, N * n_u))
    for i in range(N - 1):
        M[i * n_u:(i + 1) * n_u, (i + 1) * n_u:(i + 2) * n_u] = np.eye(n_u)
    Psi = np.zeros((n_x + N * n_u, n_x + N * n_u))
    Psi[:n_x, :n_x] = plant.Phi
    Psi[:n_x, n_x:] = plant.B @ E
    Psi[n_x:, n_x:] = M
    Fbar = np.hstack([FGK, plant.G @ E])
    return TubeData(S=S, N=N, e_max=e_max, h=h, Fbar=Fbar, Psi=Psi, plant=plant)


def _alpha_recursion_rows(e_max: np.ndarray, w_max: np.ndarray, N: int,
                          n_z: int, prune: bool = False):
    """Rows for alpha_i e_max + w_max <= alpha_{i+1} 1 (alpha_N = 1) over
    variables [z, alpha].  With ``prune`` only Pareto-maximal
    (e_max_j, w_max_j) pairs are kept; the dropped rows are dominated for
    every alpha >= 0, so the feasible set is unchanged."""
    n_s = e_max.size
    keep = np.arange(n_s)
    if prune:
        keep = [j for j in range(n_s)
                if not any((e_max[k] >= e_max[j]) and (w_max[k] >= w_max[j])
                           and (e_max[k] > e_max[j] or w_max[k] > w_max[j])
                           for k in range(n_s))]
        keep = np.array(sorted(set(keep)), dtype=int)
    p = keep.size
    rows = np.zeros((N * p, n_z + N))
    rhs = np.empty(N * p)
    for i in range(N):
        blk = slice(i * p, (i + 1) * p)
        rows[blk, n_z + i] = e_max[keep]
        if i + 1 < N:
            rows[blk, n_z + i + 1] = -1.0
            rhs[blk] = -w_max[keep]
        else:
            rhs[blk] = 1.0 - w_max[keep]
    return rows, rhs


def _omega_rows(td: TubeData, w_max: np.ndarray, n: int, N: int,
                rigid: bool, prune: bool = True):
    """Constraint rows of the horizon-test set over (z, alpha) (or z only
    for the rigid variant) for prediction indices 0..n."""
    n_z = td.n_z
    n_alpha = 0 if rigid else N
    blocks, rhs = [], []
    for i in range(n + 1):
        FP = td.fbar_power(i)
        blk = np.zeros((FP.shape[0], n_z + n_alpha))
        blk[:, :n_z] = FP
        if rigid or i >= N:
            rhs.append(1.0 - td.h)
        else:
            blk[:, n_z + i] = td.h
            rhs.append(np.ones(FP.shape[0]))
        blocks.append(blk)
    if not rigid:
        arows, arhs = _alpha_recursion_rows(td.e_max, w_max, N, n_z, prune=prune)
        blocks.append(arows)
        rhs.append(arhs)
    lb = np.concatenate([np.full(n_z, -np.inf), np.zeros(n_alpha)])
    return np.vstack(blocks), np.concatenate(rhs), lb


def compute_horizon(td: TubeData, w_max, N: Optional[int] = None,
                    rigid: bool = False, n_max: int = 200,
                    slack: float = 1e-9,
                    tols: Tolerances = DEFAULT_TOLERANCES) -> int:
    """Smallest n >= N-1 such that every constraint with prediction index
    beyond n is implied by the first n+1: for each row r of Fbar Psi^{n+1},
    max r.z over the finite-horizon feasible set stays below 1 - h_r.

    The search walks n upward reusing cached matrix powers.  An unbounded
    probe LP means the test fails at that n; an empty feasible set is an
    error (the problem is infeasible even open loop)."""
    w_max = _w_max_values(w_max)
    N = td.N if N is None else int(N)
    if np.any(td.e_max + w_max > 1.0 + TOL_SET):
        raise ValueError(
            "e_max + w_max <= 1 violated: the unit tail scaling is not a "
            "feasible choice for this disturbance bound")
    n_z = td.n_z
    for n in range(max(N - 1, 0), n_max + 1):
        rows, rhs, lb = _omega_rows(td, w_max, n, N, rigid)
        target = td.fbar_power(n + 1)
        ok = True
        for j in range(target.shape[0]):
            c = np.zeros(rows.shape[1])
            c[:n_z] = -target[j]
            res = solve_lp(LinearProgram(c=c, A_ineq=rows, b_ineq=rhs, lb=lb), tols)
            if res.status is Status.INFEASIBLE:
                raise RuntimeError(
                    "the constraint set is empty even open loop; check the "
                    "problem scaling")
            if res.status is Status.UNBOUNDED:
                ok = False
                break
            if res.status is not Status.OPTIMAL:
                raise RuntimeError(f"horizon probe LP failed: {res.message}")
            if -res.objective > 1.0 - td.h[j] + slack:
                ok = False
                break
        if ok:
            return n
    raise RuntimeError(
        f"no constraint horizon found up to n_max={n_max}; constraints are "
        "likely mis-scaled (is h < 1 with margin?)")


def verify_horizon_tail(td: TubeData, w_max, nu: int, N: Optional[int] = None,
                        probes: int = 50, tol: float = 1e-7,
                        rigid: bool = False,
                        tols: Tolerances = DEFAULT_TOLERANCES):
    """Check max over the nu-horizon set of Fbar Psi^i z <= 1 - h for
    i = nu+1 .. nu+probes.  Returns (all_pass, worst_excess)."""
    w_max = _w_max_values(w_max)
    N = td.N if N is None else int(N)
    rows, rhs, lb = _omega_rows(td, w_max, nu, N, rigid)
    n_z = td.n_z
    worst = -np.inf
    for i in range(nu + 1, nu + probes + 1):
        target = td.fbar_power(i)
        for j in range(target.shape[0]):
            c = np.zeros(rows.shape[1])
            c[:n_z] = -target[j]
            res = solve_lp(LinearProgram(c=c, A_ineq=rows, b_ineq=rhs, lb=lb), tols)
            if res.status is not Status.OPTIMAL:
                return False, np.inf
            worst = max(worst, -res.objective - (1.0 - td.h[j]))
    return worst <= tol, worst


def horizon_sequence(td: TubeData, w_max_seq: Sequence, N: Optional[int] = None,
                     rigid: bool = False, n_max: int = 200) -> list[int]:
    """Offline maintenance: the horizon each logged w_max would need,
    deduplicating consecutive equal vectors."""
    out: list[int] = []
    prev_vec, prev_nu = None, None
    for w in w_max_seq:
        vec = _w_max_values(w)
        if prev_vec is not None and np.array_equal(vec, prev_vec):
            out.append(prev_nu)
            continue
        prev_nu = compute_horizon(td, vec, N=N, rigid=rigid, n_max=n_max)
        prev_vec = vec
        out.append(prev_nu)
    return out


def _w_max_values(w_max) -> np.ndarray:
    values = getattr(w_max, "values", w_max)
    return np.asarray(values, dtype=float).reshape(-1)


def build_qp(td: TubeData, weights: CostWeights, x_k, w_max,
             mode: str = "homothetic") -> QuadraticProgram:
    """Tube MPC QP at state x_k for the given worst-case support vector.

    Homothetic: variables [s0, c, alpha] with rows (i) initial tube
    membership, (ii) tube scaling recursion, (iii) alpha >= 0, (iv) state
    and input constraints over indices 0..nu.  Rigid: alpha pinned to 1,
    families (ii)/(iii) drop and (iv) tightens to 1 - h.  The constraint
    matrix is constant per (mode, nu) and cached; only the right-hand side
    depends on (x_k, w_max).
    """
    if td.nu is None:
        raise ValueError("constraint horizon nu is unset; run compute_horizon")
    if mode not in ("homothetic", "rigid"):
        raise ValueError(f"unknown mode {mode!r}")
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    w_max = _w_max_values(w_max)
    key = (mode, td.nu)
    if key not in td._qp_cache:
        td._qp_cache[key] = _qp_template(td, mode)
    A, rhs_builder = td._qp_cache[key]
    H, c_lin = _qp_cost(td, weights, mode)
    return QuadraticProgram(H=H, c=c_lin, A_ineq=A, b_ineq=rhs_builder(x_k, w_max))


def _qp_template(td: TubeData, mode: str):
    """Constant constraint matrix and rhs builder for one (mode, nu)."""
    n_z, N, n_s, nu = td.n_z, td.N, td.n_s, td.nu
    V_s = td.S.V
    n_x = V_s.shape[1]
    if mode == "rigid":
        blocks = [np.hstack([-V_s, np.zeros((n_s, n_z - n_x))])]
        for i in range(nu + 1):
            blocks.append(td.fbar_power(i))
        A = np.vstack(blocks)
        tail = np.tile(1.0 - td.h, nu + 1)

        def rhs_builder(x_k, w_max):
            return np.concatenate([1.0 - V_s @ x_k, tail])
    else:
        n_var = n_z + N
        # (i) initial tube membership V_s (x - s0) <= alpha_0 1
        blk_i = np.zeros((n_s, n_var))
        blk_i[:, :n_x] = -V_s
        blk_i[:, n_z] = -1.0
        # (ii) tube recursion rows (matrix part is w_max-independent)
        rows_ii, _ = _alpha_recursion_rows(td.e_max, np.zeros(n_s), N, n_z,
                                           prune=False)
        # (iii) alpha >= 0
        blk_iii = np.zeros((N, n_var))
        blk_iii[:, n_z:] = -np.eye(N)
        # (iv) constraint rows over prediction indices 0..nu
        blocks_iv = []
        for i in range(nu + 1):
            FP = td.fbar_power(i)
            blk = np.zeros((FP.shape[0], n_var))
            blk[:, :n_z] = FP
            if i < N:
                blk[:, n_z + i] = td.h
            blocks_iv.append(blk)
        A = np.vstack([blk_i, rows_ii, blk_iii] + blocks_iv)
        rhs_iv = np.concatenate([np.ones(td.h.size) if i < N else 1.0 - td.h
                                 for i in range(nu + 1)])

        def rhs_builder(x_k, w_max):
            rhs_ii = np.empty(N * n_s)
            for i in range(N):
                blk = slice(i * n_s, (i + 1) * n_s)
                rhs_ii[blk] = (1.0 - w_max) if i + 1 == N else -w_max
            return np.concatenate([-V_s @ x_k, rhs_ii, np.zeros(N), rhs_iv])

    return A, rhs_builder


def _qp_cost(td: TubeData, weights: CostWeights, mode: str):
    n_z, N = td.n_z, td.N
    n_x = td.plant.n_x
    if weights.Px.shape[0] != n_x or weights.Pc.shape[0] != N * td.plant.n_u:
        raise ValueError("cost weight dimensions do not match the tube data")
    if mode == "rigid":
        H = np.zeros((n_z, n_z))
        H[:n_x, :n_x] = 2.0 * weights.Px
        H[n_x:, n_x:] = 2.0 * weights.Pc
        c = np.zeros(n_z)
    else:
        n_var = n_z + N
        H = np.zeros((n_var, n_var))
        H[:n_x, :n_x] = 2.0 * weights.Px
        H[n_x:n_z, n_x:n_z] = 2.0 * weights.Pc
        H[n_z:, n_z:] = 2.0 * weights.q_alpha * np.eye(N)
        c = np.zeros(n_var)
        c[n_z:] = -2.0 * weights.q_alpha
    return H, c


@dataclass
class MpcSolution:
    """One tube MPC solve: nominal initial state, stacked input offsets,
    tube scalings (implicit tail of ones), achieved cost J, feasibility."""

    status: Status
    s0: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    cost: float = np.nan
    iterations: int = 0
    active_set: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.status is Status.OPTIMAL

    def control(self, plant: PlantModel, x_k) -> np.ndarray:
        """Applied input u = K x + c_0."""
        if not self.feasible:
            raise ValueError("no input available from an infeasible solve")
        return plant.K @ np.asarray(x_k, dtype=float) + self.c[:plant.n_u]

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "s0": None if self.s0 is None else self.s0.tolist(),
            "c": None if self.c is None else self.c.tolist(),
            "alpha": None if self.alpha is None else self.alpha.tolist(),
            "cost": float(self.cost),
        }


class MpcWorkspace:
    """Per-controller mutable state: the previous solution shifted one step
    forward seeds the next solve (warm start)."""

    def __init__(self, plant: PlantModel, td: TubeData, mode: str = "homothetic"):
        self.plant = plant
        self.td = td
        self.mode = mode
        self._warm: Optional[WarmStart] = None

    def warm_start(self) -> Optional[WarmStart]:
        return self._warm

    def update(self, sol: MpcSolution) -> None:
        if not sol.feasible:
            self._warm = None
            return
        plant, td = self.plant, self.td
        n_u, N = plant.n_u, td.N
        s0_next = plant.Phi @ sol.s0 + plant.B @ sol.c[:n_u]
        c_next = np.concatenate([sol.c[n_u:], np.zeros(n_u)])
        parts = [s0_next, c_next]
        if self.mode == "homothetic":
            parts.append(np.concatenate([sol.alpha[1:], [1.0]]))
        self._warm = WarmStart(x=np.concatenate(parts), active=sol.active_set)

    def reset(self) -> None:
        self._warm = None


def solve_step(td: TubeData, weights: CostWeights, plant: PlantModel, x_k,
               learned: Optional[LearnedSet] = None, w_max=None,
               mode: str = "homothetic",
               workspace: Optional[MpcWorkspace] = None,
               tols: Tolerances = DEFAULT_TOLERANCES) -> MpcSolution:
    """Build and solve the tube MPC QP at x_k.

    The worst-case support vector is taken from the learned set
    (w_max = support of its realisation along V_s) unless supplied
    directly.  Infeasibility is returned as a status, never raised.
    """
    if w_max is None:
        if learned is None:
            raise ValueError("either a learned set or w_max must be given")
        w_max = support(learned.realise(), td.S.V).values
    qp = build_qp(td, weights, x_k, w_max, mode=mode)
    warm = workspace.warm_start() if workspace is not None else None
    res = solve_qp(qp, tols=tols, warm_start=warm)
    if res.status is not Status.OPTIMAL:
        sol = MpcSolution(status=res.status, iterations=res.iterations)
        if workspace is not None:
            workspace.update(sol)
        return sol
    n_z, N = td.n_z, td.N
    n_x = plant.n_x
    s0 = res.x[:n_x]
    c = res.x[n_x:n_z]
    alpha = res.x[n_z:] if mode == "homothetic" else np.ones(N)
    cost = res.objective + (weights.q_alpha * N if mode == "homothetic" else 0.0)
    sol = MpcSolution(status=Status.OPTIMAL, s0=s0, c=c, alpha=alpha,
                      cost=cost, iterations=res.iterations,
                      active_set=res.active_set or ())
    if workspace is not None:
        workspace.update(sol)
    return sol


def is_feasible(td: TubeData, x_k, w_max, mode: str = "homothetic",
                tols: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Feasibility of the tube MPC constraint system at x_k (phase-1 LP on
    an equivalent pruned row set; no cost involved)."""
    if td.nu is None:
        raise ValueError("constraint horizon nu is unset; run compute_horizon")
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    w_max = _w_max_values(w_max)
    n_z, N, n_s = td.n_z, td.N, td.n_s
    V_s = td.S.V
    rows, rhs, lb = _omega_rows(td, w_max, td.nu, N, rigid=(mode == "rigid"),
                                prune=True)
    n_var = rows.shape[1]
    blk = np.zeros((n_s, n_var))
    blk[:, :V_s.shape[1]] = -V_s
    if mode == "homothetic":
        blk[:, n_z] = -1.0
        rhs_i = -V_s @ x_k
    else:
        rhs_i = 1.0 - V_s @ x_k
    # fast path: the all-ones tube with the nominal pinned at x_k
    cand = np.concatenate([x_k, np.zeros(n_z - x_k.size),
                           np.ones(n_var - n_z)])
    if np.all(rows @ cand <= rhs + 1e-10) and np.all(blk @ cand <= rhs_i + 1e-10):
        return True
    lp = LinearProgram(c=np.zeros(n_var), A_ineq=np.vstack([rows, blk]),
                       b_ineq=np.concatenate([rhs, rhs_i]), lb=lb)
    return solve_lp(lp, tols).status is Status.OPTIMAL


@dataclass
class TrajectoryExpansion:
    """Nominal prediction payload for plots: s_i, input offsets c_i, tube
    scalings alpha_i (ones beyond N), and the shared cross-section shape."""

    s: np.ndarray          # (nu+2, n_x)
    c: np.ndarray          # (nu+2, n_u), zero beyond N
    alpha: np.ndarray      # (nu+2,)
    S: HPolytope

    def to_dict(self) -> dict:
        return {"s": self.s.tolist(), "c": self.c.tolist(),
                "alpha": self.alpha.tolist(), "S": self.S.to_dict()}


def expand_trajectory(sol: MpcSolution, td: TubeData,
                      plant: PlantModel) -> TrajectoryExpansion:
    """Unroll s_{i+1} = Phi s_i + B c_i over i = 0..nu+1 with the stored
    tube scalings (tail of ones); diagnostic payload only."""
    if not sol.feasible:
        raise ValueError("cannot expand an infeasible solution")
    nu = td.nu if td.nu is not None else td.N
    n_u, N = plant.n_u, td.N
    steps = nu + 2
    s = np.zeros((steps, plant.n_x))
    cs = np.zeros((steps, n_u))
    s[0] = sol.s0
    for i in range(steps - 1):
        ci = sol.c[i * n_u:(i + 1) * n_u] if i < N else np.zeros(n_u)
        cs[i] = ci
        s[i + 1] = plant.Phi @ s[i] + plant.B @ ci
    alpha = np.ones(steps)
    alpha[:min(N, steps)] = sol.alpha[:min(N, steps)]
    return TrajectoryExpansion(s=s, c=cs, alpha=alpha, S=td.S)
