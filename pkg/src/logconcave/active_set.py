r"""Active set algorithm for the log-concave maximum likelihood estimator.

Concavity of the piecewise-linear ``psi`` is the set of ``m - 2`` linear
constraints ``v_j' psi <= 0`` (change of slope at interior point ``j``).  The
algorithm alternates between

1. maximizing L with a fixed set ``A`` of active constraints (no kink at the
   points in ``A``) and, if that candidate is not concave, moving towards it
   only as far as concavity allows and activating the constraint that blocks;
2. releasing the active constraint whose directional derivative
   :math:`H_j(\psi) = \sum_i p_i \Delta_j(x_i) - \int \Delta_j \exp\psi`,
   :math:`\Delta_j(x) = \min(x - x_j, 0)`, is largest, i.e. adding the knot
   that improves L fastest.

Three start-up strategies are provided (``variant`` 1, 2, 3).  Indices are
0-based: constraint ``j`` lives at interior point ``j``, ``1 <= j <= m-2``,
and vectors over constraints have length ``m - 2`` with entry ``j - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantViolation, NonConvergenceError
from .inner_solver import NewtonConfig, newton_maximize, subspace_maximize
from .objective import (
    DiagnosticReport,
    WeightedData,
    cell_kernels,
    diagnostics,
    eval_objective,
)

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ActiveSetConfig:
    variant: int = 3
    eps: float = 1e-7
    newton: NewtonConfig = NewtonConfig()
    max_outer: int | None = None  # None: 10 * m
    record_steps: bool = False

    def __post_init__(self):
        if self.variant not in (1, 2, 3):
            raise DomainError(f"variant must be 1, 2 or 3, got {self.variant}")
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.max_outer is not None and self.max_outer < 1:
            raise DomainError("max_outer must be positive")


@dataclass
class Step:
    """One recorded event of the algorithm (only kept with ``record_steps``).

    ``kind`` is one of ``start``, ``candidate`` (a new knot set was solved),
    ``accept`` (the candidate was concave and replaced psi), ``blend`` (psi
    moved to the convex combination ``(1-t) psi + t psi_cand``), ``activate``
    (``t = 0``: the blocking constraints were activated without moving) and
    ``final``.
    """

    kind: str
    knots: tuple
    objective: float
    psi: np.ndarray
    psi_cand: np.ndarray | None = None
    t: float | None = None
    released: int | None = None


@dataclass
class FitResult:
    psi: np.ndarray
    knots: np.ndarray
    objective: float
    n_outer_iter: int
    trace: list  # (knots, objective) at every checkpoint
    diagnostics: DiagnosticReport
    data: WeightedData
    steps: list = field(default_factory=list)
    n_inner_solves: int = 0


# ---------------------------------------------------------------------------
# constraint system
# ---------------------------------------------------------------------------


def constraint_values(psi, data: WeightedData) -> np.ndarray:
    """Slope changes ``v_j' psi`` at the interior points; psi is concave iff all are <= 0."""
    psi = np.asarray(psi, dtype=np.float64)
    return np.diff(np.diff(psi) / data.delta)


def constraint_vectors(data: WeightedData) -> np.ndarray:
    """Dense ``(m-2, m)`` matrix whose rows are the constraint vectors."""
    m = data.m
    d = data.delta
    V = np.zeros((max(m - 2, 0), m))
    for j in range(1, m - 1):
        V[j - 1, j - 1] = 1.0 / d[j - 1]
        V[j - 1, j] = -(d[j - 1] + d[j]) / (d[j - 1] * d[j])
        V[j - 1, j + 1] = 1.0 / d[j]
    return V


def basis_vectors(data: WeightedData) -> np.ndarray:
    """``(m, m)`` matrix with columns: constant, hinges ``min(x - x_j, 0)`` for interior j, identity."""
    x = data.x
    m = data.m
    B = np.empty((m, m))
    B[:, 0] = 1.0
    for j in range(1, m - 1):
        B[:, j] = np.minimum(x - x[j], 0.0)
    B[:, m - 1] = x
    return B


def directional_derivatives(psi, data: WeightedData) -> np.ndarray:
    """``H_j(psi)`` for interior ``j = 1..m-2`` (returned at position ``j - 1``).

    Uses ``H_{j+1} = H_j - delta_j (P_j - F(x_j) - delta_j J10(psi_j, psi_{j+1}))``
    with ``P_j`` the cumulative weight, starting from ``H_0 = 0``.
    """
    K = cell_kernels(psi, data)
    d = data.delta
    F = np.concatenate(([0.0], np.cumsum(d * K[0])))
    resid = np.cumsum(data.p)[:-1] - (F[:-1] + d * K[1])
    H = -np.cumsum(d * resid)
    return H[:-1]


def step_to_feasible(psi, psi_cand, data: WeightedData, tol: float = 0.0) -> float:
    """Largest ``t`` such that ``(1-t) psi + t psi_cand`` satisfies every constraint violated by ``psi_cand``.

    Only constraints with ``v' psi_cand > tol`` are considered.  The result is
    clipped to ``[0, 1)``; ``t = 0`` means psi already sits on a blocking constraint.
    """
    a = constraint_values(psi, data)
    c = constraint_values(psi_cand, data)
    viol = c > tol
    if not np.any(viol):
        raise DomainError("candidate is feasible; no step to compute")
    t = np.min(-a[viol] / (c[viol] - a[viol]))
    return float(min(max(t, 0.0), np.nextafter(1.0, 0.0)))


def _blocking(psi, psi_cand, data, t, tol):
    a = constraint_values(psi, data)
    c = constraint_values(psi_cand, data)
    viol = c > tol
    ratios = np.full(a.shape, np.inf)
    ratios[viol] = -a[viol] / (c[viol] - a[viol])
    return np.flatnonzero(ratios <= max(t, 0.0) * (1 + 1e-12) + 1e-15) + 1


# ---------------------------------------------------------------------------
# the algorithm
# ---------------------------------------------------------------------------


class _Solver:
    def __init__(self, data: WeightedData, cfg: ActiveSetConfig):
        self.data = data
        self.cfg = cfg
        self.m = data.m
        self.eps = cfg.eps
        self.n_solves = 0
        self.steps = []
        self.trace = []

    # active: boolean mask of length m, never True at 0 or m-1
    def knots_of(self, active):
        return np.flatnonzero(~active)

    def solve(self, active, warm):
        self.n_solves += 1
        return subspace_maximize(self.knots_of(active), self.data, warm, self.cfg.newton)

    def active_of(self, psi):
        act = np.zeros(self.m, dtype=bool)
        act[1:-1] = constraint_values(psi, self.data) >= -self.eps
        return act

    def feasible(self, psi):
        return bool(np.all(constraint_values(psi, self.data) <= self.eps))

    def record(self, kind, active, psi, psi_cand=None, t=None, released=None):
        if self.cfg.record_steps:
            self.steps.append(
                Step(
                    kind,
                    tuple(int(i) for i in self.knots_of(active)),
                    eval_objective(psi, self.data),
                    psi.copy(),
                    None if psi_cand is None else psi_cand.copy(),
                    t,
                    released,
                )
            )

    def restore(self, psi, active, cand, released=None):
        """Basic procedure 1: move towards infeasible candidates until one is concave."""
        q = self.m - 2
        count = 0
        while not self.feasible(cand):
            count += 1
            if count > q:
                raise InvariantViolation(f"feasibility restoration exceeded {q} steps")
            t = step_to_feasible(psi, cand, self.data, tol=self.eps)
            block = _blocking(psi, cand, self.data, t, self.eps)
            psi = (1.0 - t) * psi + t * cand
            newly = self.active_of(psi)
            if released is not None:
                newly[released] = False
            newly[block] = True
            active = active | newly
            self.record("blend" if t > 0 else "activate", active, psi, cand, t=t)
            cand = self.solve(active, psi)
            self.record("candidate", active, psi, cand)
        psi = cand
        active = active | self.active_of(psi)
        return psi, active

    def checkpoint(self, active, psi):
        self.trace.append((tuple(int(i) for i in self.knots_of(active)), eval_objective(psi, self.data)))

    def run(self, psi0=None):
        cfg = self.cfg
        m = self.m
        none_active = np.zeros(m, dtype=bool)
        all_active = np.ones(m, dtype=bool)
        all_active[[0, -1]] = False

        if cfg.variant == 1:
            if psi0 is None:
                # best affine log-density: always concave
                psi = self.solve(all_active, None)
            else:
                psi = np.array(psi0, dtype=np.float64)
            if psi.shape != (m,) or not np.all(np.isfinite(psi)):
                raise DomainError("variant 1 start must be a finite vector of length m")
            if not self.feasible(psi):
                raise DomainError("variant 1 start must be concave")
            active = self.active_of(psi)
            self.record("start", active, psi)
            cand = self.solve(active, psi)
            self.record("candidate", active, psi, cand)
            psi, active = self.restore(psi, active, cand)
        elif cfg.variant == 2:
            active = all_active
            psi = self.solve(active, None)
            self.record("start", active, psi)
        else:
            active = none_active
            psi = self.solve(active, None)
            self.record("start", active, psi)
            while not self.feasible(psi):
                active = active | self.active_of(psi)
                psi = self.solve(active, psi)
                self.record("start", active, psi)
            active = active | self.active_of(psi)
        self.checkpoint(active, psi)

        max_outer = cfg.max_outer if cfg.max_outer is not None else 10 * m
        n_outer = 0
        while True:
            H = directional_derivatives(psi, self.data)
            cand_idx = np.flatnonzero(active[1:-1]) + 1
            if cand_idx.size == 0:
                break
            h = H[cand_idx - 1]
            hmax = float(np.max(h))
            if hmax <= self.eps:
                break
            # smallest index among the maximizers, ties judged up to rounding
            best = int(np.flatnonzero(h >= hmax - TIE_RTOL * max(1.0, abs(hmax)))[0])
            n_outer += 1
            if n_outer > max_outer:
                raise NonConvergenceError(
                    f"active set did not terminate within {max_outer} outer iterations",
                    best=psi,
                    trace=self.trace,
                )
            a = int(cand_idx[best])
            trial = active.copy()
            trial[a] = False
            cand = self.solve(trial, psi)
            self.record("candidate", trial, psi, cand, released=a)
            if self.feasible(cand):
                self.record("accept", trial, cand, released=a)
            psi, active = self.restore(psi, trial, cand, released=a)
            self.checkpoint(active, psi)

        self.record("final", active, psi)
        return psi, active, n_outer


def fit(data: WeightedData, cfg: ActiveSetConfig = ActiveSetConfig(), psi0=None) -> FitResult:
    """Maximum likelihood log-concave fit: maximize L over concave piecewise-linear ``psi``.

    Parameters
    ----------
    data : WeightedData
    cfg : ActiveSetConfig
        ``variant`` 1 starts from ``psi0`` (any concave vector; defaults to the
        best affine log-density), 2 from the best linear log-density, 3 from the
        unconstrained maximizer, adding constraints until it is concave.
    psi0 : array_like, optional
        Start for variant 1.

    Returns
    -------
    FitResult
        ``knots`` are the indices not in the final active set, always
        including ``0`` and ``m - 1``.
    """
    if data.m == 2:
        psi = newton_maximize(data, None, cfg.newton)
        obj = eval_objective(psi, data)
        return FitResult(
            psi=psi,
            knots=np.array([0, 1]),
            objective=obj,
            n_outer_iter=0,
            trace=[((0, 1), obj)],
            diagnostics=diagnostics(psi, data),
            data=data,
            n_inner_solves=1,
        )
    solver = _Solver(data, cfg)
    psi, active, n_outer = solver.run(psi0)
    return FitResult(
        psi=psi,
        knots=np.flatnonzero(~active),
        objective=eval_objective(psi, data),
        n_outer_iter=n_outer,
        trace=solver.trace,
        diagnostics=diagnostics(psi, data),
        data=data,
        steps=solver.steps,
        n_inner_solves=solver.n_solves,
    )
