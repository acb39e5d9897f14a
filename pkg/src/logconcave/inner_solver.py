"""Maximizing L over log-densities with a prescribed knot set.

A knot set ``I`` (sorted 0-based indices containing ``0`` and ``m-1``) fixes
the functions that are linear between consecutive knots.  Substituting the
linear interpolation turns the problem into a complete-data problem on the
knots alone with redistributed weights, which is solved by damped Newton
with a tridiagonal Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from . import _accel
from ._accel import njit
from .errors import ConditioningError, DomainError, NonConvergenceError
from .objective import (
    WeightedData,
    cell_kernels,
    gradient_from_kernels,
    hessian_bands_from_kernels,
    objective_from_kernels,
    uniform_log_density,
)

PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class NewtonConfig:
    grad_tol: float = 1e-10
    max_iter: int = 200
    armijo_c: float = 0.01
    backtrack_factor: float = 0.5

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise DomainError("grad_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack_factor < 1:
            raise DomainError("armijo_c and backtrack_factor must lie in (0, 1)")


def check_knots(knots, m: int) -> np.ndarray:
    I = np.asarray(knots, dtype=np.intp)
    if I.ndim != 1 or I.size < 2:
        raise DomainError("a knot set needs at least two indices")
    if I[0] != 0 or I[-1] != m - 1 or np.any(np.diff(I) <= 0):
        raise DomainError(f"knots must be strictly increasing from 0 to {m - 1}")
    return I


def _interp_weights(x, xk):
    """Segment index and position in ``[0, 1]`` of every ``x`` relative to the knots ``xk``."""
    seg = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, xk.size - 2)
    lam = (x - xk[seg]) / (xk[seg + 1] - xk[seg])
    return seg, lam


def reduce_weights(knots, data: WeightedData) -> WeightedData:
    """Weights on the knots such that L restricted to the knot subspace is a complete-data objective.

    Each point between two consecutive knots splits its weight between them
    in proportion to its linear-interpolation coefficients.
    """
    I = check_knots(knots, data.m)
    xk = data.x[I]
    seg, lam = _interp_weights(data.x, xk)
    k = I.size
    w = np.bincount(seg, weights=data.p * (1.0 - lam), minlength=k)
    w += np.bincount(seg + 1, weights=data.p * lam, minlength=k)
    w /= w.sum()
    return WeightedData(xk, w)


def expand(knots, data: WeightedData, psi_knots) -> np.ndarray:
    """Linear interpolation of knot values back onto all ``m`` points."""
    I = check_knots(knots, data.m)
    psi_knots = np.asarray(psi_knots, dtype=np.float64)
    seg, lam = _interp_weights(data.x, data.x[I])
    out = (1.0 - lam) * psi_knots[seg] + lam * psi_knots[seg + 1]
    out[I] = psi_knots
    return out


# ---------------------------------------------------------------------------
# tridiagonal solve of (-H) d = g
# ---------------------------------------------------------------------------


@njit
def _ldl_solve_nb(a, b, g, rtol):
    # a: diagonal (positive), b: off-diagonal of a symmetric positive definite matrix
    n = a.shape[0]
    dd = np.empty(n)
    ll = np.empty(max(n - 1, 0))
    z = np.empty(n)
    dd[0] = a[0]
    z[0] = g[0]
    for i in range(1, n):
        scale = abs(a[i - 1]) + abs(b[i - 1])
        if i >= 2:
            scale += abs(b[i - 2])
        if not dd[i - 1] > rtol * scale:
            return z, i - 1
        ll[i - 1] = b[i - 1] / dd[i - 1]
        dd[i] = a[i] - ll[i - 1] * b[i - 1]
        z[i] = g[i] - ll[i - 1] * z[i - 1]
    scale = abs(a[n - 1])
    if n >= 2:
        scale += abs(b[n - 2])
    if not dd[n - 1] > rtol * scale:
        return z, n - 1
    z[n - 1] = z[n - 1] / dd[n - 1]
    for i in range(n - 2, -1, -1):
        z[i] = z[i] / dd[i] - ll[i] * z[i + 1]
    return z, -1


def _ldl_solve_np(a, b, g, rtol):
    n = a.size
    ab = np.zeros((2, n))
    ab[0, 1:] = b
    ab[1] = a
    try:
        c = cholesky_banded(ab, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None, 0
    scale = np.abs(a)
    scale[:-1] += np.abs(b)
    scale[1:] += np.abs(b)
    bad = np.flatnonzero(~(c[1] ** 2 > rtol * scale))
    if bad.size:
        return None, int(bad[0])
    return cho_solve_banded((c, False), g, check_finite=False), -1


def solve_tridiagonal_pd(a, b, g, rtol=PIVOT_RTOL):
    """Solve ``T d = g`` for symmetric positive definite tridiagonal ``T`` (diagonal ``a``, off ``b``).

    The pivot test runs on the equilibrated matrix ``S T S`` with
    ``S = diag(a)^(-1/2)``, so a row whose entries are all tiny (a density
    value far below its neighbours) is not mistaken for a singular one.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    nonpos = np.flatnonzero(~(a > 0))
    if nonpos.size:
        raise ConditioningError(f"Newton system numerically singular at pivot {int(nonpos[0])}")
    sc = 1.0 / np.sqrt(a)
    a_s = np.ones_like(a)
    b_s = b * sc[:-1] * sc[1:]
    g_s = g * sc
    if _accel.USE_NUMBA:
        z, bad = _ldl_solve_nb(a_s, b_s, g_s, rtol)
    else:
        z, bad = _ldl_solve_np(a_s, b_s, g_s, rtol)
    if bad >= 0:
        raise ConditioningError(f"Newton system numerically singular at pivot {bad}")
    return z * sc


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

_EPS = np.finfo(float).eps


def _evaluate(psi, data):
    with np.errstate(over="ignore", invalid="ignore"):
        K = cell_kernels(psi, data)
        val = objective_from_kernels(psi, data, K)
    return val, K


def newton_maximize(data: WeightedData, init=None, cfg: NewtonConfig = NewtonConfig(), history=None):
    """Unconstrained maximizer of L on ``data`` by damped Newton.

    Each step solves ``H d = -g`` and backtracks until the Armijo condition
    holds.  Stops once ``max|g| <= cfg.grad_tol``.  If ``history`` is a list,
    the objective after every accepted step is appended to it.
    """
    psi = uniform_log_density(data) if init is None else np.array(init, dtype=np.float64)
    if psi.shape != data.x.shape or not np.all(np.isfinite(psi)):
        raise DomainError("Newton start must be a finite vector of length m")
    val, K = _evaluate(psi, data)
    if not np.isfinite(val):
        psi = uniform_log_density(data)
        val, K = _evaluate(psi, data)
    if history is not None:
        history.append(val)

    for it in range(cfg.max_iter + 1):
        g = gradient_from_kernels(data, K)
        gnorm = np.max(np.abs(g))
        if gnorm <= cfg.grad_tol:
            return psi
        if it == cfg.max_iter:
            break
        diag, off = hessian_bands_from_kernels(data, K)
        d = solve_tridiagonal_pd(-diag, -off, g)
        slope = float(g @ d)
        # objective differences below this are rounding noise
        noise = 64 * _EPS * (1.0 + abs(val) + float(np.dot(data.delta, K[0])))
        step = 1.0
        accepted = False
        while step > 1e-14:
            cand = psi + step * d
            cval, cK = _evaluate(cand, data)
            if np.isfinite(cval) and cval >= val + cfg.armijo_c * step * slope - noise:
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            raise NonConvergenceError(
                f"line search failed at iteration {it} (max|grad| = {gnorm:.3g})", best=psi
            )
        psi, val, K = cand, cval, cK
        if history is not None:
            history.append(val)

    raise NonConvergenceError(
        f"Newton did not reach max|grad| <= {cfg.grad_tol:g} in {cfg.max_iter} iterations", best=psi
    )


def subspace_maximize(knots, data: WeightedData, warm_start=None, cfg: NewtonConfig = NewtonConfig()):
    """Maximizer of L over functions linear between consecutive ``knots``, on all ``m`` points."""
    I = check_knots(knots, data.m)
    if I.size == data.m:
        return newton_maximize(data, warm_start, cfg)
    reduced = reduce_weights(I, data)
    init = None
    if warm_start is not None:
        init = np.asarray(warm_start, dtype=np.float64)[I]
    psi_k = newton_maximize(reduced, init, cfg)
    return expand(I, data, psi_k)
