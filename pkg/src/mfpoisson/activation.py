"""Hat-shaped mollified ReLU activations.

The regularized ReLU is the convolution of max(y, 0) with a compactly
supported bump of width 1/tau; the hat activation combines three shifted
copies into a triangular bump that vanishes outside [-1 - 1/tau, 1 + 1/tau].
After rescaling, every tau shares one master profile on [-1, 1], which is
tabulated once per process as a piecewise-quintic C^2 spline so that values
and first/second derivatives come from the same polynomial (finite
differences of the value then reproduce the returned derivatives to near
machine precision). The spline evaluator is the innermost loop of training;
a numba kernel serves it when available, with an equivalent numpy fallback.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _njit = None

DEFAULT_TAU = 4.0

# Resolution of the master table over [-1, 1]; quintic interpolation error is
# ~h^6 so 2048 cells leaves the table far below the 1e-8 accuracy budget.
TABLE_CELLS = 2048
_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)


def relu(y: float) -> float:
    """max(y, 0)."""
    return y if y > 0.0 else 0.0


def hat(y: float) -> float:
    """Triangular bump: 0 outside [-1, 1], 1 - |y| inside."""
    a = abs(y)
    return 1.0 - a if a < 1.0 else 0.0


def _bump(s):
    """Unnormalized bump exp(-tan(pi s / 2)^2 / 2) on (-1, 1), 0 outside."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    t = np.tan(0.5 * np.pi * np.where(inside, s, 0.0))
    np.copyto(out, np.exp(-0.5 * t * t), where=inside)
    return out


@lru_cache(maxsize=1)
def mollifier_norm_const() -> float:
    """Normalization Z with integral of Z * bump over [-1, 1] equal to one.

    Computed once per process; tau-independent after rescaling.
    """
    with warnings.catch_warnings():
        # the integrand is flat-zero at both endpoints; quad hits its roundoff
        # heuristic long after the requested 1e-14 is met
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total, _ = integrate.quad(lambda s: float(_bump(s)), -1.0, 1.0,
                                  epsabs=1e-14, epsrel=1e-14, limit=400)
    return 1.0 / total


def mollifier(y, tau: float):
    """Width-1/tau bump tau * Z * exp(-tan(pi tau y / 2)^2 / 2), 0 for |tau y| >= 1."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    z = mollifier_norm_const()
    out = tau * z * _bump(tau * np.asarray(y, dtype=float))
    return float(out) if np.isscalar(y) else out


def _cumulative_gl(values_fn, nodes: np.ndarray) -> np.ndarray:
    """Cumulative integral of values_fn over [nodes[0], s_i] by per-cell GL-8."""
    lo = nodes[:-1]
    h = nodes[1:] - lo
    pts = lo[:, None] + 0.5 * h[:, None] * (_GL8_NODES[None, :] + 1.0)
    cell = 0.5 * h * (values_fn(pts) @ _GL8_WEIGHTS)
    out = np.empty(nodes.size)
    out[0] = 0.0
    np.cumsum(cell, out=out[1:])
    return out


def _numpy_eval(s, coef, inv_h, cells, upto):
    left = s <= -1.0
    right = s >= 1.0
    pos = (np.clip(s, -1.0, 1.0) + 1.0) * inv_h
    idx = np.minimum(pos.astype(np.int64), cells - 1)
    t = pos - idx
    rows = coef[idx]

    def horner(weights):
        acc = rows[:, -1] * weights[-1]
        for k in range(len(weights) - 2, -1, -1):
            acc = acc * t + rows[:, k + 6 - len(weights)] * weights[k]
        return acc

    v = horner(np.ones(6))
    v[left] = 0.0
    v[right] = s[right]
    d1 = d2 = None
    if upto >= 1:
        d1 = horner(np.arange(1.0, 6.0))
        d1 *= inv_h
        d1[left] = 0.0
        d1[right] = 1.0
    if upto >= 2:
        d2 = horner(np.array([2.0, 6.0, 12.0, 20.0]))
        d2 *= inv_h * inv_h
        d2[left] = 0.0
        d2[right] = 0.0
    return v, d1, d2


if _njit is not None:

    @_njit(cache=True, inline="always")
    def _sigma_point(yv, coef, inv_h, cells, tau, inv_tau):  # pragma: no cover
        """(sigma, sigma', sigma'') of the smoothed ReLU at one y.

        One cell-major coefficient row feeds all three Horner schemes, so the
        lookup touches a single cache line per evaluation.
        """
        if yv <= -inv_tau:
            return 0.0, 0.0, 0.0
        if yv >= inv_tau:
            return yv, 1.0, 0.0
        pos = (tau * yv + 1.0) * inv_h
        idx = int(pos)
        if idx >= cells:
            idx = cells - 1
        t = pos - idx
        c0 = coef[idx, 0]
        c1 = coef[idx, 1]
        c2 = coef[idx, 2]
        c3 = coef[idx, 3]
        c4 = coef[idx, 4]
        c5 = coef[idx, 5]
        v = ((((c5 * t + c4) * t + c3) * t + c2) * t + c1) * t + c0
        d1 = (((5.0 * c5 * t + 4.0 * c4) * t + 3.0 * c3) * t + 2.0 * c2) * t + c1
        d2 = ((20.0 * c5 * t + 12.0 * c4) * t + 6.0 * c3) * t + 2.0 * c2
        return v / tau, d1 * inv_h, d2 * inv_h * inv_h * tau

    @_njit(cache=True)
    def _sigma_kernel(y, coef, inv_h, cells, tau, inv_tau):  # pragma: no cover
        n = y.size
        v = np.empty(n)
        d1 = np.empty(n)
        d2 = np.empty(n)
        for i in range(n):
            v[i], d1[i], d2[i] = _sigma_point(y[i], coef, inv_h, cells,
                                              tau, inv_tau)
        return v, d1, d2

    @_njit(cache=True)
    def _hat_kernel_full(y, coef, inv_h, cells, tau, inv_tau):  # pragma: no cover
        n = y.size
        h0 = np.empty(n)
        h1 = np.empty(n)
        h2 = np.empty(n)
        edge = 1.0 + inv_tau
        for i in range(n):
            yv = y[i]
            if yv >= edge or yv <= -edge:
                h0[i] = 0.0
                h1[i] = 0.0
                h2[i] = 0.0
                continue
            a0, a1, a2 = _sigma_point(yv + 1.0, coef, inv_h, cells, tau, inv_tau)
            b0, b1, b2 = _sigma_point(2.0 * yv, coef, inv_h, cells, tau, inv_tau)
            c0, c1, c2 = _sigma_point(yv - 1.0, coef, inv_h, cells, tau, inv_tau)
            h0[i] = a0 - b0 + c0
            h1[i] = a1 - 2.0 * b1 + c1
            h2[i] = a2 - 4.0 * b2 + c2
        return h0, h1, h2

    @_njit(cache=True)
    def _hat_kernel_value(y, coef, inv_h, cells, tau, inv_tau):  # pragma: no cover
        n = y.size
        h0 = np.empty(n)
        edge = 1.0 + inv_tau
        for i in range(n):
            yv = y[i]
            if yv >= edge or yv <= -edge:
                h0[i] = 0.0
                continue
            a0, _, _ = _sigma_point(yv + 1.0, coef, inv_h, cells, tau, inv_tau)
            b0, _, _ = _sigma_point(2.0 * yv, coef, inv_h, cells, tau, inv_tau)
            c0, _, _ = _sigma_point(yv - 1.0, coef, inv_h, cells, tau, inv_tau)
            h0[i] = a0 - b0 + c0
        return h0

else:  # pragma: no cover
    _sigma_kernel = None
    _hat_kernel_full = None
    _hat_kernel_value = None


class _MasterTable:
    """Piecewise-quintic Hermite model of the unit-scale smoothed ReLU on [-1, 1].

    Node data (value, slope, curvature) comes from composite Gauss-Legendre
    cumulative quadrature of the bump; endpoint data is pinned to the exact
    analytic values so the polynomial pieces join the outer branches exactly.
    """

    def __init__(self, cells: int = TABLE_CELLS):
        z = mollifier_norm_const()
        nodes = np.linspace(-1.0, 1.0, cells + 1)
        rho = lambda s: z * _bump(s)
        r = _cumulative_gl(rho, nodes)                    # int rho
        t = _cumulative_gl(lambda s: s * rho(s), nodes)   # int s rho(s)
        # exact endpoint values: total mass one, odd first moment zero
        r[-1] = 1.0
        t[-1] = 0.0
        val = nodes * r - t
        slope = r
        curv = rho(nodes)
        val[0] = slope[0] = curv[0] = 0.0
        val[-1] = slope[-1] = 1.0
        curv[-1] = 0.0

        h = 2.0 / cells
        f0, f1 = val[:-1], val[1:]
        m0, m1 = h * slope[:-1], h * slope[1:]
        k0, k1 = h * h * curv[:-1], h * h * curv[1:]
        da = f1 - f0 - m0 - 0.5 * k0
        db = m1 - m0 - k0
        dc = k1 - k0
        # cell-major monomial coefficients: one cache-friendly row per cell
        coef = np.empty((cells, 6))
        coef[:, 0] = f0
        coef[:, 1] = m0
        coef[:, 2] = 0.5 * k0
        coef[:, 3] = 10.0 * da - 4.0 * db + 0.5 * dc
        coef[:, 4] = -15.0 * da + 7.0 * db - dc
        coef[:, 5] = 6.0 * da - 3.0 * db + 0.5 * dc
        self.cells = cells
        self.h = h
        self.inv_h = 1.0 / h
        self.coef = coef

    def eval_upto(self, s: np.ndarray, upto: int):
        """(value, d/ds, d^2/ds^2) of the master profile at flat s; entries
        above `upto` are None."""
        return _numpy_eval(s, self.coef, self.inv_h, self.cells, upto)


@lru_cache(maxsize=1)
def _master_table() -> _MasterTable:
    return _MasterTable()


class MollifiedActivation:
    """Smoothed ReLU and hat activation at a fixed mollification scale tau.

    Immutable after construction and safe to share across threads. All
    evaluators accept scalars or numpy arrays.
    """

    def __init__(self, tau: float, table_resolution: int = TABLE_CELLS):
        if tau <= 0.0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self.inv_tau = 1.0 / float(tau)
        self.z_const = mollifier_norm_const()
        self.table_resolution = table_resolution
        self.table = _master_table() if table_resolution == TABLE_CELLS \
            else _MasterTable(table_resolution)

    def _kernel_args(self):
        t = self.table
        return t.coef, t.inv_h, t.cells, self.tau, self.inv_tau

    # -- smoothed ReLU ----------------------------------------------------

    def _sigma_upto(self, y: np.ndarray, upto: int):
        """sigma and derivatives at flat y; exact branches outside
        [-1/tau, 1/tau]: zero below, identity above."""
        if _sigma_kernel is not None:
            v, d1, d2 = _sigma_kernel(y, *self._kernel_args())
            return v, (d1 if upto >= 1 else None), (d2 if upto >= 2 else None)
        v, d1, d2 = self.table.eval_upto(self.tau * y, upto)
        v /= self.tau
        neg = y <= -self.inv_tau
        pos = y >= self.inv_tau
        v[neg] = 0.0
        v[pos] = y[pos]
        if upto >= 1:
            d1[neg] = 0.0
            d1[pos] = 1.0
        if upto >= 2:
            d2 *= self.tau
            d2[neg] = 0.0
            d2[pos] = 0.0
        return v, d1, d2

    def sigma(self, y, order: int = 0):
        """Smoothed ReLU (order 0) or its first/second derivative."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        arr = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        out = self._sigma_upto(arr, order)[order]
        if np.ndim(y) == 0:
            return float(out[0])
        return out.reshape(np.shape(y))

    # -- hat --------------------------------------------------------------

    def hat_upto(self, y, upto: int = 2):
        """(hat, hat', hat'') of the smoothed hat at y, exactly 0 for
        |y| >= 1 + 1/tau; entries above `upto` are None."""
        arr = np.asarray(y, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        if _hat_kernel_full is not None:
            if upto == 0:
                parts = (_hat_kernel_value(flat, *self._kernel_args()), None, None)
            else:
                h0, h1, h2 = _hat_kernel_full(flat, *self._kernel_args())
                parts = (h0, h1, h2 if upto >= 2 else None)
        else:
            n = flat.size
            args = np.empty(3 * n)
            args[:n] = flat + 1.0
            args[n:2 * n] = 2.0 * flat
            args[2 * n:] = flat - 1.0
            v, d1, d2 = self._sigma_upto(args, upto)
            outside = np.abs(flat) >= 1.0 + self.inv_tau

            def combine(part, mid_factor):
                if part is None:
                    return None
                res = part[:n] - mid_factor * part[n:2 * n] + part[2 * n:]
                res[outside] = 0.0
                return res

            parts = (combine(v, 1.0), combine(d1, 2.0), combine(d2, 4.0))

        def shape(part):
            if part is None:
                return None
            if arr.ndim == 0:
                return float(part[0])
            return part.reshape(arr.shape)

        return tuple(shape(p) for p in parts)

    def hat_all(self, y):
        return self.hat_upto(y, 2)

    def hat(self, y, order: int = 0):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        return self.hat_upto(y, order)[order]


@lru_cache(maxsize=32)
def get_activation(tau: float = DEFAULT_TAU) -> MollifiedActivation:
    """Shared activation object for a given tau (table built once)."""
    return MollifiedActivation(float(tau))


# -- reference quadrature path (independent of the table) -----------------

def sigma_tau_quad(y: float, tau: float, tol: float = 1e-10) -> float:
    """Smoothed ReLU by direct adaptive quadrature of the convolution."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    inv = 1.0 / tau
    if y <= -inv:
        return 0.0
    if y >= inv:
        return float(y)
    upper = min(y, inv)
    val, _ = integrate.quad(lambda t: float(mollifier(t, tau)) * (y - t),
                            -inv, upper, epsabs=tol, epsrel=0.0, limit=400)
    return val


def sigma_tau(y: float, tau: float, method: str = "table") -> float:
    """Smoothed ReLU; `table` serves the precomputed spline, `quad` integrates."""
    if method == "quad":
        return sigma_tau_quad(y, tau)
    if method != "table":
        raise ValueError("method must be 'table' or 'quad'")
    return get_activation(tau).sigma(y)


def sigma_tau_deriv(y: float, tau: float, order: int) -> float:
    """First derivative (bump convolved with the step) or second (the bump itself)."""
    if order == 1:
        return get_activation(tau).sigma(y, order=1)
    if order == 2:
        return float(mollifier(y, tau))
    raise ValueError("order must be 1 or 2")


def hat_tau(y: float, tau: float, order: int = 0) -> float:
    """Smoothed hat built from three shifted smoothed ReLUs (termwise derivatives)."""
    return get_activation(tau).hat(y, order=order)


def _hat_sharp_deriv(y: np.ndarray) -> np.ndarray:
    return np.where((y > -1.0) & (y < 0.0), 1.0,
                    np.where((y > 0.0) & (y < 1.0), -1.0, 0.0))


def h1_distance(f, f_prime, g, g_prime, breakpoints, cells_per_unit: int) -> float:
    """H1(R) distance between two piecewise-smooth functions agreeing outside
    the breakpoint hull, by composite Gauss-Legendre between breakpoints."""
    total = 0.0
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        ncell = max(1, int(math.ceil((hi - lo) * cells_per_unit)))
        edges = np.linspace(lo, hi, ncell + 1)
        h = edges[1:] - edges[:-1]
        pts = (edges[:-1, None] + 0.5 * h[:, None] * (_GL8_NODES[None, :] + 1.0)).ravel()
        w = (0.5 * h[:, None] * np.broadcast_to(_GL8_WEIGHTS, (ncell, 8))).ravel()
        diff0 = f(pts) - g(pts)
        diff1 = f_prime(pts) - g_prime(pts)
        total += float(w @ (diff0 * diff0 + diff1 * diff1))
    return math.sqrt(total)


def h1_distance_hat(tau: float, quad_points: int) -> float:
    """H1(R) distance between the sharp hat and its tau-mollification.

    The integrand is supported in [-2, 2] once tau >= 1; quad_points counts
    quadrature cells per unit interval (kinks of the sharp hat are cell edges).
    """
    if tau < 1.0:
        raise ValueError("tau must be >= 1")
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    act = get_activation(tau)

    def sharp(y):
        return np.where(np.abs(y) < 1.0, 1.0 - np.abs(y), 0.0)

    return h1_distance(sharp, _hat_sharp_deriv,
                       lambda y: act.hat_upto(y, 0)[0],
                       lambda y: act.hat_upto(y, 1)[1],
                       (-2.0, -1.0, 0.0, 1.0, 2.0), quad_points)
