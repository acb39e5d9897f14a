r"""Complete-data objective for piecewise-linear log-densities.

A vector ``psi`` of length ``m`` is identified with the continuous function
that interpolates ``(x[i], psi[i])`` linearly and equals ``-inf`` outside
``[x[0], x[-1]]``.  The objective is

.. math::

    L(\psi) = \sum_i p_i \psi_i - \int \exp\psi(x)\,dx
            = \sum_i p_i \psi_i - \sum_k \delta_k J(\psi_k, \psi_{k+1}),

which is smooth, strictly concave and coercive on :math:`\mathbb{R}^m`.
Its maximizer over all of :math:`\mathbb{R}^m` is a probability density whose
distribution function matches the data in the sense checked by
:func:`diagnostics`.

Indices are 0-based throughout: points ``0..m-1``, cells ``0..m-2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DomainError
from .numerics import jab_cells

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightedData:
    """Sorted distinct support points with probability weights.

    Use :func:`prepare` to build one from raw observations.  ``renormalized``
    is set when input weights had to be rescaled by more than the rounding
    tolerance.
    """

    x: np.ndarray
    p: np.ndarray
    renormalized: bool = False
    delta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if x.ndim != 1 or x.shape != p.shape:
            raise DomainError("x and p must be 1-d arrays of equal length")
        if x.size < 2:
            raise DegenerateDataError(f"need at least 2 distinct points, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise DomainError("x and p must be finite")
        delta = np.diff(x)
        if np.any(delta <= 0):
            raise DomainError("x must be strictly increasing")
        if np.any(p <= 0):
            raise DomainError("weights must be positive")
        if abs(p.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"weights sum to {p.sum()!r}, not 1")
        x.flags.writeable = False
        p.flags.writeable = False
        delta.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "delta", delta)

    @property
    def m(self) -> int:
        return self.x.size


def prepare(points, weights=None) -> WeightedData:
    """Reduce raw observations to distinct sorted points and normalized weights.

    Tied points (exact floating-point equality) have their weights summed and
    points with zero total weight are dropped.

    >>> d = prepare([3, 1, 3, 2])
    >>> d.x.tolist(), d.p.tolist()
    ([1.0, 2.0, 3.0], [0.25, 0.25, 0.5])
    """
    pts = np.asarray(points, dtype=np.float64).ravel()
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    if weights is None:
        w = np.ones_like(pts)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != pts.shape:
            raise DomainError("points and weights differ in length")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise DegenerateDataError("total weight is zero")

    x, inverse = np.unique(pts, return_inverse=True)
    p = np.bincount(inverse, weights=w, minlength=x.size)
    keep = p > 0
    x, p = x[keep], p[keep]
    if x.size < 2:
        raise DegenerateDataError(f"need at least 2 distinct points with positive weight, got {x.size}")

    renormalized = weights is not None and abs(total - 1.0) > WEIGHT_SUM_TOL
    p = p / p.sum()
    # one more pass pins the sum to 1 within a few ulps
    p = p / p.sum()
    return WeightedData(x, p, renormalized=renormalized)


def _as_psi(psi, data):
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != data.x.shape:
        raise DomainError(f"psi has shape {psi.shape}, expected {data.x.shape}")
    return psi


def cell_kernels(psi, data: WeightedData) -> np.ndarray:
    """``(6, m-1)`` array of ``J, J10, J01, J20, J02, J11`` at each cell's end values."""
    psi = _as_psi(psi, data)
    return jab_cells(psi[:-1], psi[1:])


def objective_from_kernels(psi, data, K) -> float:
    return float(np.dot(data.p, psi) - np.dot(data.delta, K[0]))


def gradient_from_kernels(data, K) -> np.ndarray:
    g = data.p.copy()
    g[:-1] -= data.delta * K[1]
    g[1:] -= data.delta * K[2]
    return g


def hessian_bands_from_kernels(data, K):
    """Diagonal and first off-diagonal of the Hessian of L (negative definite)."""
    diag = np.zeros(data.m)
    diag[:-1] += data.delta * K[3]
    diag[1:] += data.delta * K[4]
    return -diag, -(data.delta * K[5])


def eval_objective(psi, data: WeightedData) -> float:
    """``L(psi)``.

    >>> eval_objective([0.0, 0.0], WeightedData([0.0, 1.0], [0.5, 0.5]))
    -1.0
    """
    psi = _as_psi(psi, data)
    return objective_from_kernels(psi, data, cell_kernels(psi, data))


def gradient(psi, data: WeightedData) -> np.ndarray:
    return gradient_from_kernels(data, cell_kernels(psi, data))


def hessian_bands(psi, data: WeightedData):
    return hessian_bands_from_kernels(data, cell_kernels(psi, data))


def hessian(psi, data: WeightedData) -> np.ndarray:
    """Dense ``m x m`` Hessian of L.  Tridiagonal; entries with ``|j-k| > 1`` are exactly 0."""
    diag, off = hessian_bands(psi, data)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


# ---------------------------------------------------------------------------
# distribution function and moments
# ---------------------------------------------------------------------------


def cdf_nodes(x, psi, K=None) -> np.ndarray:
    """``F(x[i])`` for every node, ``F(x[0]) = 0``."""
    x = np.asarray(x, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    if K is None:
        K = jab_cells(psi[:-1], psi[1:])
    F = np.empty(x.size)
    F[0] = 0.0
    np.cumsum(np.diff(x) * K[0], out=F[1:])
    return F


def cdf_at(x, psi, r) -> np.ndarray:
    """``F(r)`` for an array ``r`` inside ``[x[0], x[-1]]`` (no domain check)."""
    x = np.asarray(x, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    Fn = cdf_nodes(x, psi)
    k = np.clip(np.searchsorted(x, r, side="right") - 1, 0, x.size - 2)
    lam = (r - x[k]) / (x[k + 1] - x[k])
    psi_r = (1.0 - lam) * psi[k] + lam * psi[k + 1]
    partial = jab_cells(psi[k].ravel(), psi_r.ravel())[0].reshape(r.shape)
    return Fn[k] + (r - x[k]) * partial


def cdf(psi, data: WeightedData, r):
    """Distribution function ``F(r) = integral of exp(psi)`` from ``x[0]`` to ``r``.

    Not normalized: ``cdf(psi, data, x[-1])`` is the total mass of ``exp(psi)``.
    Accepts a scalar or an array ``r``; raises :class:`DomainError` outside the support.
    """
    psi = _as_psi(psi, data)
    ra = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(ra)) or np.any(ra < data.x[0]) or np.any(ra > data.x[-1]):
        raise DomainError(f"cdf argument outside support [{data.x[0]}, {data.x[-1]}]")
    out = cdf_at(data.x, psi, ra)
    return float(out) if np.ndim(r) == 0 else out


def mean_and_second_moment(psi, data: WeightedData, a: float = 0.0):
    """``(integral of (x-a) f, integral of (x-a)^2 f)`` with ``f = exp(psi)``."""
    K = cell_kernels(psi, data)
    xl = data.x[:-1] - a
    xr = data.x[1:] - a
    d = data.delta
    first = np.sum(d * (xl * K[1] + xr * K[2]))
    second = np.sum(d * (xl**2 * K[1] + xr**2 * K[2])) - np.sum(d**3 * K[5])
    return float(first), float(second)


def mean_integral_of_F(psi, data: WeightedData, k: int) -> float:
    """Average of F over cell ``k`` (0-based, ``0 <= k <= m-2``): ``F(x_k) + delta_k J10``."""
    if not 0 <= k <= data.m - 2:
        raise IndexError(f"cell index {k} outside 0..{data.m - 2}")
    K = cell_kernels(psi, data)
    return float(cdf_nodes(data.x, psi, K)[k] + data.delta[k] * K[1, k])


@dataclass
class DiagnosticReport:
    """Residuals of the distribution-function characterization of the unrestricted maximizer.

    ``interval_residuals[k]`` is the average of F over cell ``k`` minus
    ``p[0] + ... + p[k]``; ``mean_residual`` is ``sum p_i x_i - integral x f``;
    ``second_moment_residual`` compares ``integral x^2 f`` with
    ``sum p_i x_i^2 - sum delta_k^3 J11``.
    """

    total_mass_residual: float
    interval_residuals: np.ndarray
    mean_residual: float
    second_moment_residual: float
    objective: float

    def max_abs(self) -> float:
        return float(
            max(
                abs(self.total_mass_residual),
                np.max(np.abs(self.interval_residuals)),
                abs(self.mean_residual),
                abs(self.second_moment_residual),
            )
        )

    def to_dict(self) -> dict:
        return {
            "total_mass_residual": self.total_mass_residual,
            "interval_residuals": [float(v) for v in self.interval_residuals],
            "mean_residual": self.mean_residual,
            "second_moment_residual": self.second_moment_residual,
            "objective": self.objective,
        }


def diagnostics(psi, data: WeightedData) -> DiagnosticReport:
    psi = _as_psi(psi, data)
    K = cell_kernels(psi, data)
    d = data.delta
    F = np.concatenate(([0.0], np.cumsum(d * K[0])))
    interval = F[:-1] + d * K[1] - np.cumsum(data.p)[:-1]
    xl = data.x[:-1]
    xr = data.x[1:]
    first = np.sum(d * (xl * K[1] + xr * K[2]))
    j11 = np.sum(d**3 * K[5])
    second = np.sum(d * (xl**2 * K[1] + xr**2 * K[2])) - j11
    mean_res = float(np.dot(data.p, data.x) - first)
    second_res = float(np.dot(data.p, data.x**2) - j11 - second)
    return DiagnosticReport(
        total_mass_residual=float(F[-1] - 1.0),
        interval_residuals=interval,
        mean_residual=mean_res,
        second_moment_residual=second_res,
        objective=objective_from_kernels(psi, data, K),
    )


def coercivity_bound(psi, data: WeightedData) -> float:
    """Upper bound ``-min(p) R + log(1 + R) - log(e min(delta))`` on ``L(psi)``, ``R`` = range of psi."""
    psi = _as_psi(psi, data)
    R = float(psi.max() - psi.min())
    return -data.p.min() * R + np.log1p(R) - np.log(np.e * data.delta.min())


def uniform_log_density(data: WeightedData) -> np.ndarray:
    """Constant log-density of the uniform distribution on ``[x[0], x[-1]]``."""
    return np.full(data.m, -np.log(data.x[-1] - data.x[0]))


def warn_if_renormalized(data: WeightedData):
    if data.renormalized:
        warnings.warn("input weights did not sum to 1 and were renormalized", stacklevel=2)
