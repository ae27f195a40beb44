"""Independent verification tools: finite-difference gradients, a classical
1D Neumann Poisson solver, closed-form energies, and a 1D hat-interpolant
builder that fabricates clouds with known networks.

Everything here deliberately avoids the analytic-gradient code paths it is
used to check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from .activation import MollifiedActivation
from .field import SampleBatch, empirical_loss
from .params import ParticleCloud
from .spectral import CosineSeries, series_eval


def fd_gradient(cloud: ParticleCloud, batch: SampleBatch, f: CosineSeries,
                act: MollifiedActivation, particle_index: int,
                h: float = 1e-5) -> np.ndarray:
    """Central differences of the batch loss in the ambient coordinates of one
    particle; w is perturbed without renormalization (the loss extends
    smoothly off the sphere)."""
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-7, 1e-3]")
    d = cloud.dim
    out = np.empty(d + 3)

    def loss_with(coord: int, value: float) -> float:
        work = cloud.copy()
        if coord == 0:
            work.c[particle_index] = value
        elif coord == 1:
            work.a[particle_index] = value
        elif coord == d + 2:
            work.b[particle_index] = value
        else:
            work.w[particle_index, coord - 2] = value
        return empirical_loss(work, batch, f, act)

    base = np.empty(d + 3)
    base[0] = cloud.c[particle_index]
    base[1] = cloud.a[particle_index]
    base[2:-1] = cloud.w[particle_index]
    base[-1] = cloud.b[particle_index]
    for coord in range(d + 3):
        plus = loss_with(coord, base[coord] + h)
        minus = loss_with(coord, base[coord] - h)
        out[coord] = (plus - minus) / (2.0 * h)
    return out


def fd_poisson_1d(f: CosineSeries, grid_n: int):
    """Second-order finite differences for -u'' = f on [0,1] with Neumann ends,
    normalized to zero trapezoid mean. Returns (nodes, values).

    Ghost points make the boundary rows (2 u_0 - 2 u_1)/h^2 = f_0 and
    symmetrically at the right end; the singular constant mode is removed by
    pinning u_0 during the tridiagonal solve and re-centering afterwards.
    """
    if f.dim != 1:
        raise ValueError("the reference solver is one-dimensional")
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    if not f.mean_zero:
        raise ValueError("source has a k = 0 term: the Neumann system is singular")
    n = grid_n - 1                       # intervals
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, grid_n)
    rhs = series_eval(f, x[:, None]) * h * h

    # pin u_0 = 0: unknowns u_1..u_n, rows are the interior stencils plus the
    # right Neumann row; the dropped left row holds by discrete compatibility.
    band = np.zeros((3, n))
    band[0, 1:] = -1.0                   # superdiagonal
    band[1, :] = 2.0                     # diagonal
    band[2, :-1] = -1.0                  # subdiagonal
    band[2, -2] = -2.0                   # right ghost row: -2 u_{n-1} + 2 u_n
    b = rhs[1:].copy()
    u = np.empty(grid_n)
    u[0] = 0.0
    u[1:] = solve_banded((1, 1), band, b)

    weights = np.full(grid_n, h)
    weights[0] = weights[-1] = 0.5 * h
    u -= weights @ u
    return x, u


def analytic_energy(u_star: CosineSeries) -> float:
    """Energy at the exact minimizer: minus half the Dirichlet energy,
    termwise -1/2 coef^2 pi^2 |k|_2^2 2^(-#nonzero)."""
    total = 0.0
    for k, coef in u_star.terms.items():
        if all(v == 0 for v in k):
            raise ValueError("series has a k = 0 term")
        lam = math.pi ** 2 * float(sum(v * v for v in k))
        nnz = sum(1 for v in k if v != 0)
        total += coef * coef * lam * 0.5 ** nnz
    return -0.5 * total


def hat_interpolant_1d(target: CosineSeries, m: int,
                       tau: float | None = None) -> ParticleCloud:
    """Cloud whose network is the piecewise-linear interpolant of the target
    at m uniform nodes.

    On [0,1] the unit hat centered at node x_j restricts to 1 - |x - x_j|, so
    any piecewise-linear function with those knots is a combination of the m
    hats: interior coefficients are minus half the slope jumps, the two
    boundary hats absorb the remaining linear part. Needs tau >> m (default
    4 m) so mollification error stays below interpolation error.
    """
    if target.dim != 1:
        raise ValueError("hat interpolant is one-dimensional")
    if m < 4:
        raise ValueError("m must be >= 4")
    if tau is None:
        tau = 4.0 * m
    nodes = np.linspace(0.0, 1.0, m)
    g = series_eval(target, nodes[:, None])
    h = nodes[1] - nodes[0]

    alpha = np.empty(m)
    alpha[1:-1] = -(g[2:] - 2.0 * g[1:-1] + g[:-2]) / (2.0 * h)
    inner = alpha[1:-1]
    # residual linear part r(x) = r0 (1-x) + r1 x after interior kinks
    r0 = g[0] - float(inner @ (1.0 - nodes[1:-1]))
    r1 = g[-1] - float(inner @ nodes[1:-1])
    alpha[0] = r0
    alpha[-1] = r1

    return ParticleCloud(
        1, float(tau),
        c=np.zeros(m),
        a=m * alpha,
        w=np.ones((m, 1)),
        b=-nodes,
    )
