r"""The kernel :math:`J(r, s) = \int_0^1 \exp((1-t) r + t s)\,dt` and its partials.

All six partial derivatives of order at most two,

.. math::

    J_{ab}(r, s) = \int_0^1 (1-t)^a t^b \exp((1-t) r + t s)\,dt,

are reduced to functions of one variable through
:math:`J_{ab}(r, s) = e^r J_{ab}(0, s - r)` and :math:`J_{ab}(r, s) = J_{ba}(s, r)`.
Near the diagonal the closed forms cancel catastrophically, so a fourth degree
Taylor polynomial is used when ``|s - r|`` is at most 0.005 (J), 0.01 (first
order) or 0.02 (second order).

Two array backends exist, see :mod:`logconcave._accel`.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _accel
from ._accel import njit
from .errors import DomainError

# |y| thresholds at or below which the Taylor polynomial is used
THRESHOLD_0 = 0.005
THRESHOLD_1 = 0.01
THRESHOLD_2 = 0.02
# above this y, J_ab(r, s) is evaluated as exp(s) * exp(-y) J_ab(0, y) so that
# neither factor can overflow or underflow on its own
FLIP = 1.0

# a! (b+k)! / (k! (k+a+b+1)!), k = 0..4
_T00 = (1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120)
_T10 = (1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720)
_T20 = (2.0 / 6, 2.0 / 24, 2.0 / 120, 2.0 / 720, 2.0 / 5040)
_T11 = (1.0 / 6, 2.0 / 24, 3.0 / 120, 4.0 / 720, 5.0 / 5040)


class JDeriv(NamedTuple):
    """Derivative order ``(a, b)``: ``a`` in the first argument, ``b`` in the second."""

    a: int
    b: int


VALID_DERIVS = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))


# --------------------------------------------------------------------------
# one-variable building blocks.  g_ab(y) = J_ab(0, y) for y <= FLIP and
# h_ab(y) = exp(-y) J_ab(0, y) for y > FLIP.  Written with math only so the
# same source is compiled by numba and called directly by the scalar API.
# --------------------------------------------------------------------------


def _poly4(c0, c1, c2, c3, c4, y):
    return c0 + y * (c1 + y * (c2 + y * (c3 + y * c4)))


def _g00_closed(y):
    return math.expm1(y) / y


def _g10_closed(y):
    return (math.expm1(y) - y) / (y * y)


def _g20_closed(y):
    return 2.0 * (math.expm1(y) - y - 0.5 * y * y) / (y * y * y)


def _h00(y):
    return -math.expm1(-y) / y


def _h10(y):
    return (1.0 - math.exp(-y) * (1.0 + y)) / (y * y)


def _h20(y):
    return 2.0 * (1.0 - math.exp(-y) * (1.0 + y + 0.5 * y * y)) / (y * y * y)


def _j00(r, s):
    y = s - r
    if y > FLIP:
        return math.exp(s) * _h00(y)
    if abs(y) <= THRESHOLD_0:
        return math.exp(r) * _poly4(1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, y)
    return math.exp(r) * _g00_closed(y)


def _j10(r, s):
    y = s - r
    if y > FLIP:
        return math.exp(s) * _h10(y)
    if abs(y) <= THRESHOLD_1:
        return math.exp(r) * _poly4(1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, y)
    return math.exp(r) * _g10_closed(y)


def _j20(r, s):
    y = s - r
    if y > FLIP:
        return math.exp(s) * _h20(y)
    if abs(y) <= THRESHOLD_2:
        return math.exp(r) * _poly4(2.0 / 6, 2.0 / 24, 2.0 / 120, 2.0 / 720, 2.0 / 5040, y)
    return math.exp(r) * _g20_closed(y)


def _j11(r, s):
    # symmetric; (1-t)t = (1-t) - (1-t)^2 is better conditioned than the direct formula
    y = s - r
    if y > FLIP:
        return math.exp(s) * (_h10(y) - _h20(y))
    if abs(y) <= THRESHOLD_2:
        return math.exp(r) * _poly4(1.0 / 6, 2.0 / 24, 3.0 / 120, 4.0 / 720, 5.0 / 5040, y)
    return math.exp(r) * (_g10_closed(y) - _g20_closed(y))


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------

_g00_closed_nb = njit(_g00_closed)
_g10_closed_nb = njit(_g10_closed)
_g20_closed_nb = njit(_g20_closed)
_h00_nb = njit(_h00)
_h10_nb = njit(_h10)
_h20_nb = njit(_h20)


@njit
def _poly4_nb(c0, c1, c2, c3, c4, y):
    return c0 + y * (c1 + y * (c2 + y * (c3 + y * c4)))


@njit
def _j00_nb(r, s):
    y = s - r
    if y > 1.0:
        return math.exp(s) * _h00_nb(y)
    if abs(y) <= 0.005:
        return math.exp(r) * _poly4_nb(1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, y)
    return math.exp(r) * _g00_closed_nb(y)


@njit
def _j10_nb(r, s):
    y = s - r
    if y > 1.0:
        return math.exp(s) * _h10_nb(y)
    if abs(y) <= 0.01:
        return math.exp(r) * _poly4_nb(1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, y)
    return math.exp(r) * _g10_closed_nb(y)


@njit
def _j20_nb(r, s):
    y = s - r
    if y > 1.0:
        return math.exp(s) * _h20_nb(y)
    if abs(y) <= 0.02:
        return math.exp(r) * _poly4_nb(2.0 / 6, 2.0 / 24, 2.0 / 120, 2.0 / 720, 2.0 / 5040, y)
    return math.exp(r) * _g20_closed_nb(y)


@njit
def _j11_nb(r, s):
    y = s - r
    if y > 1.0:
        return math.exp(s) * (_h10_nb(y) - _h20_nb(y))
    if abs(y) <= 0.02:
        return math.exp(r) * _poly4_nb(1.0 / 6, 2.0 / 24, 3.0 / 120, 4.0 / 720, 5.0 / 5040, y)
    return math.exp(r) * (_g10_closed_nb(y) - _g20_closed_nb(y))


@njit
def _jab_cells_nb(r, s):
    n = r.shape[0]
    out = np.empty((6, n))
    for i in range(n):
        out[0, i] = _j00_nb(r[i], s[i])
        out[1, i] = _j10_nb(r[i], s[i])
        out[2, i] = _j10_nb(s[i], r[i])
        out[3, i] = _j20_nb(r[i], s[i])
        out[4, i] = _j20_nb(s[i], r[i])
        out[5, i] = _j11_nb(r[i], s[i])
    return out


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------


def _np_kernel(r, s, threshold, series, g_closed, h):
    y = s - r
    small = np.abs(y) <= threshold
    big = y > FLIP
    mid = ~(small | big)
    out = np.empty_like(y)
    ys = y[small]
    out[small] = np.exp(r[small]) * _poly4(*series, ys)
    out[mid] = np.exp(r[mid]) * g_closed(y[mid])
    out[big] = np.exp(s[big]) * h(y[big])
    return out


def _g00c_np(y):
    return np.expm1(y) / y


def _g10c_np(y):
    return (np.expm1(y) - y) / (y * y)


def _g20c_np(y):
    return 2.0 * (np.expm1(y) - y - 0.5 * y * y) / (y * y * y)


def _h00_np(y):
    return -np.expm1(-y) / y


def _h10_np(y):
    return (1.0 - np.exp(-y) * (1.0 + y)) / (y * y)


def _h20_np(y):
    return 2.0 * (1.0 - np.exp(-y) * (1.0 + y + 0.5 * y * y)) / (y * y * y)


def _jab_cells_np(r, s):
    out = np.empty((6, r.shape[0]))
    out[0] = _np_kernel(r, s, THRESHOLD_0, _T00, _g00c_np, _h00_np)
    out[1] = _np_kernel(r, s, THRESHOLD_1, _T10, _g10c_np, _h10_np)
    out[2] = _np_kernel(s, r, THRESHOLD_1, _T10, _g10c_np, _h10_np)
    out[3] = _np_kernel(r, s, THRESHOLD_2, _T20, _g20c_np, _h20_np)
    out[4] = _np_kernel(s, r, THRESHOLD_2, _T20, _g20c_np, _h20_np)
    out[5] = _np_kernel(
        r, s, THRESHOLD_2, _T11, lambda z: _g10c_np(z) - _g20c_np(z), lambda z: _h10_np(z) - _h20_np(z)
    )
    return out


def jab_cells(r, s):
    """All six kernels for arrays of argument pairs.

    Parameters
    ----------
    r, s : array_like
        Equal-length 1-d arrays of finite reals.

    Returns
    -------
    ndarray, shape (6, n)
        Rows ``J, J10, J01, J20, J02, J11`` evaluated at ``(r[i], s[i])``.
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    if _accel.USE_NUMBA:
        return _jab_cells_nb(r, s)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return _jab_cells_np(r, s)


# --------------------------------------------------------------------------
# scalar API
# --------------------------------------------------------------------------


def _check_finite(r, s):
    r = float(r)
    s = float(s)
    if not (math.isfinite(r) and math.isfinite(s)):
        raise DomainError(f"J kernel needs finite arguments, got ({r}, {s})")
    return r, s


def j(r: float, s: float) -> float:
    """``J(r, s)``, symmetric and strictly positive."""
    r, s = _check_finite(r, s)
    return _j00(r, s)


def j_deriv(d, r: float, s: float) -> float:
    """Partial derivative ``J_ab(r, s)`` for ``d = (a, b)`` with ``a + b <= 2``."""
    a, b = int(d[0]), int(d[1])
    if (a, b) not in VALID_DERIVS:
        raise DomainError(f"unsupported derivative order {(a, b)}")
    r, s = _check_finite(r, s)
    if (a, b) == (0, 0):
        return _j00(r, s)
    if (a, b) == (1, 0):
        return _j10(r, s)
    if (a, b) == (0, 1):
        return _j10(s, r)
    if (a, b) == (2, 0):
        return _j20(r, s)
    if (a, b) == (0, 2):
        return _j20(s, r)
    return _j11(r, s)


def taylor_branch(d, y: float) -> float:
    """Fourth degree Taylor polynomial of ``J_ab(0, y)`` as evaluated near the diagonal."""
    a, b = int(d[0]), int(d[1])
    y = float(y)
    if a < b:
        # J_ab(0, y) = e^y J_ba(0, -y), mirroring the evaluation path
        return math.exp(y) * taylor_branch((b, a), -y)
    c = [
        math.factorial(a) * math.factorial(b + k) / (math.factorial(k) * math.factorial(k + a + b + 1))
        for k in range(5)
    ]
    return _poly4(*c, y)


def closed_branch(d, y: float) -> float:
    """Closed-form value of ``J_ab(0, y)`` for ``0 < |y| <= 1``, as evaluated off the diagonal."""
    a, b = int(d[0]), int(d[1])
    y = float(y)
    if (a, b) == (0, 0):
        return _g00_closed(y)
    if (a, b) == (1, 0):
        return _g10_closed(y)
    if (a, b) == (0, 1):
        return math.exp(y) * _g10_closed(-y)
    if (a, b) == (2, 0):
        return _g20_closed(y)
    if (a, b) == (0, 2):
        return math.exp(y) * _g20_closed(-y)
    if (a, b) == (1, 1):
        return _g10_closed(y) - _g20_closed(y)
    raise DomainError(f"unsupported derivative order {(a, b)}")
