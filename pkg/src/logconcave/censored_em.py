"""EM algorithm for censored or binned observations under a log-concave density.

Observations are either exact points ``left == right > 0`` or intervals
``(left, right]`` with ``0 <= left < right <= inf``.  The working support is
``[a, b]`` with ``a``, ``b`` the smallest and largest finite value among exact
points and interval endpoints; right-censored observations are truncated to
``(left, b]``.  Mass beyond ``b`` (a cure fraction) is not modelled.

The log-density lives on a fixed grid (all exact points and finite endpoints
plus ``grid_refinement`` equally spaced points inside every gap).  Each EM
iteration

* E-step: spreads each interval's mass ``1/n`` over the grid cells it covers,
  proportionally to the current conditional probability, placing each cell's
  mass at the conditional mean of that cell;
* M-step: fits the complete-data problem by the active set algorithm.  For
  log-densities linear on grid cells a point mass at the conditional cell mean
  is equivalent to splitting it between the cell's end points, so the M-step
  is solved on the grid itself and maximizes the exact surrogate.  The fit is
  rescaled to total mass exactly 1 afterwards.

Grid points that end up with zero weight are left out of the M-step fit and
filled in by linear interpolation (or by continuing the end slopes when the
density has underflowed at an end of the support).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .active_set import ActiveSetConfig, FitResult, fit
from .errors import DegenerateDataError, DomainError, InvariantViolation
from .numerics import jab_cells
from .objective import WeightedData, cdf_at, cdf_nodes, prepare

ASCENT_SLACK = 1e-10


@dataclass(frozen=True)
class CensoredObservation:
    left: float
    right: float

    def __post_init__(self):
        left = float(self.left)
        right = float(self.right)
        if math.isnan(left) or math.isnan(right) or math.isinf(left):
            raise DomainError(f"invalid observation ({self.left}, {self.right}]")
        if left == right:
            if not left > 0 or math.isinf(left):
                raise DomainError(f"exact observation must be positive and finite, got {left}")
        elif not 0 <= left < right:
            raise DomainError(f"need 0 <= left < right, got ({left}, {right}]")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def exact(self) -> bool:
        return self.left == self.right

    @property
    def right_censored(self) -> bool:
        return math.isinf(self.right)


def observations(left, right) -> list:
    """Build a list of :class:`CensoredObservation` from two equal-length sequences."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if left.shape != right.shape:
        raise DomainError("left and right differ in length")
    return [CensoredObservation(a, b) for a, b in zip(left, right)]


@dataclass(frozen=True)
class EmConfig:
    loglik_tol: float = 1e-8
    max_em_iter: int = 500
    grid_refinement: int = 4
    active_set: ActiveSetConfig = ActiveSetConfig()

    def __post_init__(self):
        if not self.loglik_tol > 0:
            raise DomainError("loglik_tol must be positive")
        if self.max_em_iter < 1:
            raise DomainError("max_em_iter must be positive")
        if self.grid_refinement < 0:
            raise DomainError("grid_refinement must be nonnegative")


@dataclass
class EmResult:
    psi: np.ndarray
    grid: np.ndarray
    loglik_trace: list
    n_iter: int
    converged: bool
    last_fit: FitResult | None = None
    truncated_right: int = 0
    notes: list = field(default_factory=list)


def _finite_values(obs):
    vals = []
    for o in obs:
        vals.append(o.left)
        if not o.exact and not o.right_censored:
            vals.append(o.right)
    return np.asarray(vals, dtype=float)


def build_grid(obs, refinement: int = 4) -> np.ndarray:
    """Sorted union of exact points and finite endpoints, each gap refined by ``refinement`` points."""
    base = np.unique(_finite_values(obs))
    if base.size < 2:
        raise DegenerateDataError("observations determine fewer than 2 distinct grid points")
    if refinement == 0:
        return base
    frac = np.arange(1, refinement + 1) / (refinement + 1)
    inner = base[:-1, None] + frac[None, :] * np.diff(base)[:, None]
    return np.unique(np.concatenate([base, inner.ravel()]))


def censored_loglik(psi, grid, obs) -> float:
    """Normalized censored log-likelihood of the density ``exp(psi)`` on ``grid``.

    Returns ``-inf`` if some observation has zero probability.
    """
    x = np.asarray(grid, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if not obs:
        raise DomainError("no observations")
    left = np.array([o.left for o in obs])
    right = np.array([o.right for o in obs])
    exact = left == right
    total = 0.0
    if np.any(exact):
        pts = left[exact]
        if np.any(pts < x[0]) or np.any(pts > x[-1]):
            return -np.inf
        total += float(np.sum(np.interp(pts, x, psi)))
    if not np.all(exact):
        lo = np.clip(left[~exact], x[0], x[-1])
        hi = np.clip(right[~exact], x[0], x[-1])
        F = cdf_at(x, psi, np.concatenate([lo, hi]))
        mass = F[hi.size :] - F[: hi.size]
        if not np.all(mass > 0):
            return -np.inf
        total += float(np.sum(np.log(mass)))
    return total / len(obs)


def _cell_index(x, value):
    return int(np.searchsorted(x, value, side="left"))


def conditional_cells(psi, grid, obs):
    """Aggregated conditional distribution of the observations on the grid.

    Returns
    -------
    cell_mass : ndarray, shape (m-1,)
        Mass of ``P(. | psi)`` in each grid cell from interval observations.
    point_mass : ndarray, shape (m,)
        Mass of exact observations at each grid point.
    cell_mean_frac : ndarray, shape (m-1,)
        Conditional mean of each cell as a fraction of the cell, ``J01 / J``.
    cell_left_frac : ndarray, shape (m-1,)
        ``J10 / J = 1 - cell_mean_frac``, computed without cancellation.
    """
    x = np.asarray(grid, dtype=float)
    psi = np.asarray(psi, dtype=float)
    m = x.size
    n = len(obs)
    K = jab_cells(psi[:-1], psi[1:])
    cellF = np.diff(x) * K[0]
    Fn = np.concatenate(([0.0], np.cumsum(cellF)))
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(K[0] > 0, K[2] / K[0], 0.5)
        left = np.where(K[0] > 0, K[1] / K[0], 0.5)
    cell_mass = np.zeros(m - 1)
    point_mass = np.zeros(m)
    for i, o in enumerate(obs):
        if o.exact:
            k = _cell_index(x, o.left)
            if k >= m or x[k] != o.left:
                raise DomainError(f"exact observation {i} ({o.left}) is not a grid point")
            point_mass[k] += 1.0 / n
            continue
        lo_v = max(o.left, x[0])
        hi_v = x[-1] if o.right_censored else min(o.right, x[-1])
        lo = _cell_index(x, lo_v) if lo_v < x[-1] else m - 1
        hi = _cell_index(x, hi_v)
        total = Fn[hi] - Fn[lo] if hi > lo else 0.0
        if not total > 0:
            raise DegenerateDataError(
                f"observation {i} ({o.left}, {o.right}] has zero probability under the current density"
            )
        cell_mass[lo:hi] += cellF[lo:hi] / total / n
    return cell_mass, point_mass, frac, left


def cell_representatives(psi, obs, grid):
    """Support points and masses of the discretized ``P(. | psi)``, before merging.

    Exact observations sit at their grid point; each cell's interval mass sits
    at the conditional mean of the cell.  Zero masses are dropped.
    """
    x = np.asarray(grid, dtype=float)
    cell_mass, point_mass, frac, _ = conditional_cells(psi, x, obs)
    reps = x[:-1] + frac * np.diff(x)
    pts = np.concatenate([x, reps])
    w = np.concatenate([point_mass, cell_mass])
    keep = w > 0
    return pts[keep], w[keep]


def e_step(psi, obs, grid) -> WeightedData:
    """Discretized conditional distribution ``P(. | psi)``: cell masses at conditional cell means.

    Raises :class:`DegenerateDataError` if the result has fewer than two
    distinct points; :func:`cell_representatives` gives the raw points.
    """
    return prepare(*cell_representatives(psi, obs, grid))


def _grid_weights(cell_mass, point_mass, frac, left):
    w = point_mass.copy()
    w[:-1] += cell_mass * left
    w[1:] += cell_mass * frac
    return w


def _extend(grid, keep, psi_sub):
    # The complete-data maximizer only kinks at points with positive weight, so
    # zero-weight interior points are filled in by linear interpolation.  Zero
    # weight at the ends means the density underflowed there; continuing the
    # end slopes keeps psi finite and concave while adding no representable mass.
    xs = grid[keep]
    out = np.interp(grid, xs, psi_sub)
    lo = grid < xs[0]
    hi = grid > xs[-1]
    if np.any(lo):
        slope = (psi_sub[1] - psi_sub[0]) / (xs[1] - xs[0])
        out[lo] = psi_sub[0] + slope * (grid[lo] - xs[0])
    if np.any(hi):
        slope = (psi_sub[-1] - psi_sub[-2]) / (xs[-1] - xs[-2])
        out[hi] = psi_sub[-1] + slope * (grid[hi] - xs[-1])
    return out


def em_fit(obs, cfg: EmConfig = EmConfig(), callback=None) -> EmResult:
    """Maximize the censored log-likelihood over log-concave densities by EM.

    The log-likelihood trace is nondecreasing; a decrease beyond
    ``1e-10`` raises :class:`InvariantViolation`.  ``callback(it, psi, loglik)``
    is called after every iteration if given.
    """
    obs = list(obs)
    if not obs:
        raise DegenerateDataError("no observations")
    if all(o.right_censored for o in obs):
        raise DegenerateDataError("all observations are right-censored; the support has no finite upper end")
    has_intervals = any(not o.exact for o in obs)
    # refinement only matters where interval mass can be spread
    grid = build_grid(obs, cfg.grid_refinement if has_intervals else 0)
    m = grid.size
    notes = []
    n_right = sum(o.right_censored for o in obs)
    for i, o in enumerate(obs):
        if o.right_censored and o.left >= grid[-1]:
            raise DegenerateDataError(
                f"observation {i} ({o.left}, inf] starts at or beyond the support maximum {float(grid[-1])!r}"
            )
    if n_right:
        notes.append(f"{n_right} right-censored observations truncated at support maximum {float(grid[-1])!r}")

    psi = np.full(m, -math.log(grid[-1] - grid[0]))
    ll = censored_loglik(psi, grid, obs)
    if not np.isfinite(ll):
        raise DegenerateDataError("some observation has zero probability under the uniform start")
    trace = [ll]
    converged = False
    last = None
    it = 0
    for it in range(1, cfg.max_em_iter + 1):
        cell_mass, point_mass, frac, left = conditional_cells(psi, grid, obs)
        w = _grid_weights(cell_mass, point_mass, frac, left)
        keep = w > 0
        if np.count_nonzero(keep) < 2:
            raise DegenerateDataError("conditional distribution is concentrated on fewer than 2 grid points")
        data = WeightedData(grid[keep], w[keep] / w[keep].sum())
        last = fit(data, cfg.active_set)
        new = _extend(grid, keep, last.psi)
        # exact normalization keeps the likelihood a probability model
        new -= math.log(cdf_nodes(grid, new)[-1])
        new_ll = censored_loglik(new, grid, obs)
        if not new_ll >= ll - ASCENT_SLACK:
            raise InvariantViolation(f"EM log-likelihood decreased from {float(ll)!r} to {float(new_ll)!r} at iteration {it}")
        psi = new
        gain = new_ll - ll
        ll = new_ll
        trace.append(ll)
        if callback is not None:
            callback(it, psi, ll)
        if not has_intervals or gain < cfg.loglik_tol:
            converged = True
            break

    return EmResult(
        psi=psi,
        grid=grid,
        loglik_trace=trace,
        n_iter=it,
        converged=converged,
        last_fit=last,
        truncated_right=n_right,
        notes=notes,
    )
