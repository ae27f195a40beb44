"""Feature map, network evaluation, Monte-Carlo energy and mean-field velocity.

A single neuron contributes c + a * hat(w . x + b); the network is the
particle average (or plain sum under the "sum" scaling). The energy is the
variational Neumann functional

    E(u) = int |grad u|^2 / 2 - f u  +  (int u)^2 / 2

discretized on a sample batch, and the per-particle velocity is the exact
ambient gradient of that discrete loss scaled by the particle count, i.e.
the empirical estimate of the first-variation gradient driving the
mean-field flow. Fixed summation orders keep results bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import MollifiedActivation
from .params import ParamPoint, ParticleCloud, tangent_project_cloud
from .spectral import CosineSeries, series_eval

_EVAL_CHUNK = 16384


@dataclass
class SampleBatch:
    """Quadrature points in the unit cube with normalized weights.

    Uniform weights give the Monte-Carlo mean; Gauss-Legendre tensor weights
    turn the same code into deterministic quadrature.
    """

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be (n, d)")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.points.shape[0],):
                raise ValueError("weights must match the number of points")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights


@dataclass
class VelocityReport:
    """Per-particle ambient gradient, its tangent projection, and the batch loss."""

    ambient: np.ndarray
    tangent: np.ndarray
    loss_value: float


def _scale_factor(m: int, scaling: str) -> float:
    if scaling == "mean":
        return 1.0 / m
    if scaling == "sum":
        return 1.0
    raise ValueError("scaling must be 'mean' or 'sum'")


def feature(p: ParamPoint, x, act: MollifiedActivation) -> float:
    """c + a * hat(w . x + b)."""
    z = float(np.asarray(x, dtype=float) @ p.w + p.b)
    return p.c + p.a * act.hat(z)


def feature_grad_theta(p: ParamPoint, x, act: MollifiedActivation) -> np.ndarray:
    """Ambient gradient (1, hat(z), a x hat'(z), a hat'(z)) with z = w . x + b."""
    x = np.asarray(x, dtype=float)
    z = float(x @ p.w + p.b)
    h0, h1, _ = act.hat_all(z)
    out = np.empty(p.dim + 3)
    out[0] = 1.0
    out[1] = h0
    out[2:-1] = p.a * h1 * x
    out[-1] = p.a * h1
    return out


def feature_grad_x(p: ParamPoint, x, act: MollifiedActivation) -> np.ndarray:
    """Spatial gradient a w hat'(z)."""
    x = np.asarray(x, dtype=float)
    z = float(x @ p.w + p.b)
    return p.a * act.hat(z, order=1) * p.w


def feature_grad_x_theta(p: ParamPoint, x, act: MollifiedActivation) -> np.ndarray:
    """d x (d+3) Jacobian of the spatial gradient in the ambient coordinates.

    Columns: zero in c; w hat'(z) in a; a hat'(z) I + a hat''(z) w x^T in the
    w-block (row = spatial component, column = w-coordinate); a w hat''(z) in b.
    """
    x = np.asarray(x, dtype=float)
    d = p.dim
    z = float(x @ p.w + p.b)
    _, h1, h2 = act.hat_all(z)
    out = np.zeros((d, d + 3))
    out[:, 1] = p.w * h1
    out[:, 2:-1] = p.a * h2 * np.outer(p.w, x)
    out[:, 2:-1] += np.eye(d) * (p.a * h1)
    out[:, -1] = p.a * h2 * p.w
    return out


def _forward(cloud: ParticleCloud, pts: np.ndarray, act: MollifiedActivation,
             upto: int = 2):
    """Z = X w^T + b and the hat value/derivatives on it, shape (n, m) each."""
    z = pts @ cloud.w.T + cloud.b[None, :]
    return act.hat_upto(z, upto)


def network_eval(cloud: ParticleCloud, x, act: MollifiedActivation,
                 scaling: str = "mean"):
    """Network value at a point (d,) or batch (n, d); batches are chunked."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    s = _scale_factor(cloud.m, scaling)
    out = np.empty(pts.shape[0])
    base = float(cloud.c.sum()) * s
    for lo in range(0, pts.shape[0], _EVAL_CHUNK):
        chunk = pts[lo:lo + _EVAL_CHUNK]
        h0 = _forward(cloud, chunk, act, upto=0)[0]
        out[lo:lo + _EVAL_CHUNK] = base + h0 @ (cloud.a * s)
    return float(out[0]) if single else out


def network_grad_x(cloud: ParticleCloud, x, act: MollifiedActivation,
                   scaling: str = "mean"):
    """Spatial gradient of the network at a point (d,) or batch (n, d)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    s = _scale_factor(cloud.m, scaling)
    out = np.empty(pts.shape)
    aw = (cloud.a[:, None] * cloud.w) * s
    for lo in range(0, pts.shape[0], _EVAL_CHUNK):
        chunk = pts[lo:lo + _EVAL_CHUNK]
        h1 = _forward(cloud, chunk, act, upto=1)[1]
        out[lo:lo + _EVAL_CHUNK] = h1 @ aw
    return out[0] if single else out


def _loss_terms(cloud, batch, f, act, scaling, need_velocity):
    pts = batch.points
    if pts.shape[1] != cloud.dim:
        raise ValueError("batch dimension does not match cloud dimension")
    omega = batch.weight_vector()
    s = _scale_factor(cloud.m, scaling)
    h0, h1, h2 = _forward(cloud, pts, act, upto=2 if need_velocity else 1)
    u = float(cloud.c.sum()) * s + h0 @ (cloud.a * s)
    gu = h1 @ ((cloud.a[:, None] * cloud.w) * s)
    fvals = series_eval(f, pts)
    ubar = float(omega @ u)
    loss = float(omega @ (0.5 * np.einsum("ij,ij->i", gu, gu) - fvals * u)
                 + 0.5 * ubar * ubar)
    if not need_velocity:
        return loss, None

    # ambient gradient of the loss w.r.t. particle j, divided by the network
    # scale s (for the mean scaling this is m * dL/dtheta_j, the empirical
    # mean-field velocity). q folds the source and mean-penalty terms.
    q = ubar - fvals
    d_mat = gu @ cloud.w.T                       # w_j . grad u(x_i)
    wh1 = omega[:, None] * h1
    g2 = h2 * d_mat + h1 * q[:, None]
    wg2 = omega[:, None] * g2
    m = cloud.m
    ambient = np.empty((m, cloud.dim + 3))
    ambient[:, 0] = float(omega @ q)
    ambient[:, 1] = (h1 * d_mat + h0 * q[:, None]).T @ omega
    ambient[:, 2:-1] = cloud.a[:, None] * (wh1.T @ gu + wg2.T @ pts)
    ambient[:, -1] = cloud.a * (g2.T @ omega)
    return loss, ambient


def empirical_loss(cloud: ParticleCloud, batch: SampleBatch, f: CosineSeries,
                   act: MollifiedActivation, scaling: str = "mean") -> float:
    """Batch-discretized energy: weighted mean of |grad u|^2/2 - f u plus half
    the squared weighted mean of u."""
    if batch.n < 1:
        raise ValueError("batch is empty")
    loss, _ = _loss_terms(cloud, batch, f, act, scaling, need_velocity=False)
    return loss


def empirical_velocity(cloud: ParticleCloud, batch: SampleBatch, f: CosineSeries,
                       act: MollifiedActivation, scaling: str = "mean") -> VelocityReport:
    """Per-particle ambient velocity (m times the loss gradient under the mean
    scaling) and its tangent projection, plus the batch loss from the same pass."""
    if batch.n < 1:
        raise ValueError("batch is empty")
    loss, ambient = _loss_terms(cloud, batch, f, act, scaling, need_velocity=True)
    tangent = tangent_project_cloud(cloud.w, ambient)
    return VelocityReport(ambient=ambient, tangent=tangent, loss_value=loss)


def quadrature_batch(d: int, level: int) -> SampleBatch:
    """Tensor-product Gauss-Legendre nodes/weights on [0,1]^d (level per axis)."""
    if not 8 <= level <= 256:
        raise ValueError("level must be in [8, 256]")
    nodes, weights = np.polynomial.legendre.leggauss(level)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    pts = np.stack([g.ravel() for g in np.meshgrid(*([nodes] * d), indexing="ij")],
                   axis=1)
    w = np.ones(pts.shape[0])
    for wg in np.meshgrid(*([weights] * d), indexing="ij"):
        w *= wg.ravel()
    return SampleBatch(pts, w)


def quadrature_loss(cloud: ParticleCloud, f: CosineSeries,
                    act: MollifiedActivation, level: int) -> float:
    """Deterministic energy by tensor Gauss-Legendre quadrature; d <= 3 only."""
    if cloud.dim > 3:
        raise ValueError("quadrature loss supports d <= 3 only")
    return empirical_loss(cloud, quadrature_batch(cloud.dim, level), f, act)
